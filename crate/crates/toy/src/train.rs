//! Seeded SGD training loop and accuracy evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{make_dataset, DataError, FrameRateMode, SyntheticSample};
use crate::model::{ConfigError, Model, ModelConfig, ModelInput};

/// Mixed into the config seed for the held-out split.
const TEST_STREAM: u64 = 0x7e57_da7a;
/// Mixed into the config seed so shuffling and initialisation draw from
/// different streams.
const SHUFFLE_STREAM: u64 = 0x5eed_5a1e;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("sample {index} has answer {answer} but the model has {classes} classes")]
    ClassOutOfRange {
        index: usize,
        answer: usize,
        classes: usize,
    },
    #[error("loss diverged to {loss} in epoch {epoch}")]
    Diverged { epoch: usize, loss: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: ModelConfig,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub train_size: usize,
    pub test_size: usize,
    /// Mean tokens per training input.
    pub mean_context_length: f64,
}

/// Train a fresh model on `train_set` and score it on `test_set`.
pub fn train(
    config: &ModelConfig,
    train_set: &[SyntheticSample],
    test_set: &[SyntheticSample],
) -> Result<(Model, TrainReport), TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut model = Model::new(config.clone())?;
    for (index, s) in train_set.iter().chain(test_set).enumerate() {
        if s.answer >= config.classes {
            return Err(TrainError::ClassOutOfRange {
                index,
                answer: s.answer,
                classes: config.classes,
            });
        }
    }
    let inputs: Vec<ModelInput> = train_set.iter().map(|s| model.encode(s)).collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut grad = vec![0.0; model.param_count()];
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                total += model.loss_and_grad(&inputs[i], train_set[i].answer, &mut grad);
            }
            let step = config.learning_rate / batch.len() as f64;
            model
                .params_mut()
                .iter_mut()
                .zip(&grad)
                .for_each(|(p, g)| *p -= step * g);
        }
        let loss = total / inputs.len() as f64;
        if !loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged { epoch, loss });
        }
        epoch_losses.push(loss);
    }

    let train_accuracy = accuracy_of(&model, &inputs, train_set);
    let test_accuracy = (!test_set.is_empty()).then(|| evaluate(&model, test_set));
    let mean_context_length =
        inputs.iter().map(|i| i.len()).sum::<usize>() as f64 / inputs.len() as f64;
    let report = TrainReport {
        config: config.clone(),
        epoch_losses,
        train_accuracy,
        test_accuracy,
        train_size: train_set.len(),
        test_size: test_set.len(),
        mean_context_length,
    };
    Ok((model, report))
}

/// Dataset sizes and sampling mode for [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_size: usize,
    pub test_size: usize,
    pub frame_rate: FrameRateMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { train_size: 2000, test_size: 500, frame_rate: FrameRateMode::Variable }
    }
}

/// Generate train and test splits from `config.seed` and train on them.
pub fn run_experiment(config: &ModelConfig, experiment: &ExperimentConfig) -> Result<TrainReport, TrainError> {
    config.validate()?;
    let train_set = make_dataset(experiment.train_size, config.classes, experiment.frame_rate, config.seed)?;
    let test_set = match experiment.test_size {
        0 => Vec::new(),
        n => make_dataset(n, config.classes, experiment.frame_rate, config.seed ^ TEST_STREAM)?,
    };
    train(config, &train_set, &test_set).map(|(_, report)| report)
}

/// Fraction of samples whose arg-max prediction equals the answer.
pub fn evaluate(model: &Model, samples: &[SyntheticSample]) -> f64 {
    let inputs: Vec<ModelInput> = samples.iter().map(|s| model.encode(s)).collect();
    accuracy_of(model, &inputs, samples)
}

fn accuracy_of(model: &Model, inputs: &[ModelInput], samples: &[SyntheticSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = inputs
        .iter()
        .zip(samples)
        .filter(|(i, s)| model.predict(i) == s.answer)
        .count();
    hits as f64 / samples.len() as f64
}
