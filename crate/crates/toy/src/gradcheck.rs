//! Central finite-difference check of the model's analytic gradient.

use thiserror::Error;

use crate::data::{make_dataset, FrameRateMode};
use crate::model::{ConfigError, Model, ModelConfig};

pub const STEP: f64 = 1e-5;
/// Largest width accepted; the check perturbs every parameter.
pub const MAX_DIM: usize = 16;
/// Denominator floor for the relative error. Gradient entries whose scale is
/// below this are compared in absolute terms, since central differences
/// carry roughly 1e-11 of rounding noise at this step.
pub const RELATIVE_FLOOR: f64 = 1e-6;
const SAMPLES: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradCheckError {
    #[error("dim {0} exceeds {MAX_DIM}; use a smaller config")]
    TooLarge(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Maximum relative error between the analytic gradient of the loss summed
/// over a few synthetic samples and its central finite difference, taken
/// over every parameter.
pub fn grad_check(config: &ModelConfig) -> Result<f64, GradCheckError> {
    if config.dim > MAX_DIM {
        return Err(GradCheckError::TooLarge(config.dim));
    }
    let mut model = Model::new(config.clone())?;
    let samples = make_dataset(SAMPLES, config.classes, FrameRateMode::Variable, config.seed)
        .expect("valid dataset arguments");
    let inputs: Vec<_> = samples.iter().map(|s| model.encode(s)).collect();
    let total_loss = |m: &Model| {
        inputs
            .iter()
            .zip(&samples)
            .map(|(i, s)| m.loss(i, s.answer))
            .sum::<f64>()
    };

    let mut analytic = vec![0.0; model.param_count()];
    for (i, s) in inputs.iter().zip(&samples) {
        model.loss_and_grad(i, s.answer, &mut analytic);
    }

    let mut worst: f64 = 0.0;
    for (p, &a) in analytic.iter().enumerate() {
        let orig = model.params()[p];
        model.params_mut()[p] = orig + STEP;
        let up = total_loss(&model);
        model.params_mut()[p] = orig - STEP;
        let down = total_loss(&model);
        model.params_mut()[p] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let scale = a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        worst = worst.max((a - numeric).abs() / scale);
    }
    Ok(worst)
}

/// A config small enough for [`grad_check`].
pub fn small_config(base: &ModelConfig) -> ModelConfig {
    ModelConfig {
        dim: MAX_DIM.min(base.dim),
        heads: 2,
        hidden: 24,
        ..base.clone()
    }
}
