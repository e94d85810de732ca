use octav_toy::{
    grad_check, make_dataset, run_experiment, small_config, train, ExperimentConfig, FrameRateMode, Model, ModelConfig, ModelInput,
    Query, TimeEncoding, TokenContent,
};
use proptest::prelude::*;

/// Independent answer oracle: the class of the last frame strictly before the
/// sound (or the first strictly after it).
fn scan_answer(s: &octav_toy::SyntheticSample) -> Option<usize> {
    let iv = s.sound.interval;
    match s.query {
        Query::Before => s
            .frame_events
            .iter()
            .rev()
            .find(|f| f.timestamp < iv.start())
            .map(|f| f.class),
        Query::After => s
            .frame_events
            .iter()
            .find(|f| f.timestamp > iv.end())
            .map(|f| f.class),
    }
}

#[test]
fn stored_answers_match_brute_force_scan() {
    for mode in [FrameRateMode::Uniform, FrameRateMode::Variable] {
        for classes in [2, 3, 8] {
            for s in make_dataset(500, classes, mode, 42).unwrap() {
                assert_eq!(scan_answer(&s), Some(s.answer));
            }
        }
    }
}

#[test]
fn variable_mode_decorrelates_index_and_time() {
    // the k-th frame's timestamp should vary a lot across clips
    let data = make_dataset(400, 8, FrameRateMode::Variable, 3).unwrap();
    let firsts: Vec<f64> = data.iter().map(|s| s.frame_events[0].timestamp).collect();
    let mean = firsts.iter().sum::<f64>() / firsts.len() as f64;
    let var = firsts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / firsts.len() as f64;
    assert!(var.sqrt() > 1.0, "std of first-frame time {}", var.sqrt());
}

fn sample_input(encoding: TimeEncoding, seed: u64) -> (Model, ModelInput) {
    let s = &make_dataset(1, 8, FrameRateMode::Variable, seed).unwrap()[0];
    let model = Model::new(ModelConfig {
        time_encoding: encoding,
        seed,
        ..ModelConfig::default()
    })
    .unwrap();
    let input = model.encode(s);
    (model, input)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn none_encoding_is_order_agnostic(seed in 0u64..1000, rot in 1usize..20) {
        let (model, input) = sample_input(TimeEncoding::None, seed);
        let mut shuffled = input.clone();
        let r = rot % input.len();
        shuffled.tokens.rotate_left(r);
        shuffled.tokens.swap(0, input.len() - 1);
        let (a, b) = (model.logits(&input), model.logits(&shuffled));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn rote_logits_shift_invariant(seed in 0u64..1000, c in 0.0f64..500.0) {
        let (model, input) = sample_input(TimeEncoding::Rote, seed);
        let mut shifted = input.clone();
        shifted.positions.iter_mut().for_each(|p| *p += c);
        let (a, b) = (model.logits(&input), model.logits(&shifted));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
        }
    }

    #[test]
    fn itt_input_doubles_context(seed in 0u64..1000, k in 2usize..200) {
        let s = &make_dataset(1, 8, FrameRateMode::Variable, seed).unwrap()[0];
        let plain = ModelInput::encode(s, TimeEncoding::RopeIndex, k);
        let itt = ModelInput::encode(s, TimeEncoding::Itt, k);
        prop_assert_eq!(itt.len(), 2 * plain.len());
        for (i, t) in itt.tokens.iter().enumerate() {
            match t {
                TokenContent::Time(id) => prop_assert!(i % 2 == 1 && *id < k),
                _ => prop_assert!(i % 2 == 0),
            }
        }
    }
}

#[test]
fn rote_shift_changes_index_rotary_logits_only_by_position() {
    // sanity for the test above: rotary actually affects the logits
    let (model, input) = sample_input(TimeEncoding::Rote, 5);
    let mut scaled = input.clone();
    scaled.positions.iter_mut().for_each(|p| *p *= 1.7);
    let (a, b) = (model.logits(&input), model.logits(&scaled));
    assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-6));
}

#[test]
fn grad_check_rote_and_none() {
    for enc in [TimeEncoding::Rote, TimeEncoding::None] {
        let cfg = small_config(&ModelConfig {
            time_encoding: enc,
            ..ModelConfig::default()
        });
        let err = grad_check(&cfg).unwrap();
        assert!(err < 1e-4, "{}: {err}", enc.name());
    }
}

#[test]
fn grad_check_rejects_wide_models() {
    assert!(grad_check(&ModelConfig::default()).is_err());
}

/// Every frame shows the answer class, so the pooled embedding alone
/// separates the classes.
fn separable_set(n: usize) -> Vec<octav_toy::SyntheticSample> {
    let mut data = make_dataset(n, 4, FrameRateMode::Uniform, 8).unwrap();
    for s in &mut data {
        let answer = s.answer;
        s.frame_events.iter_mut().for_each(|f| f.class = answer);
    }
    data
}

#[test]
fn linear_probe_fits_separable_data() {
    let data = separable_set(64);
    let cfg = ModelConfig {
        layers: 0,
        classes: 4,
        epochs: 100,
        ..ModelConfig::default()
    };
    let (_, report) = train(&cfg, &data, &[]).unwrap();
    assert_eq!(report.train_accuracy, 1.0);
    assert!(report.test_accuracy.is_none());
}

#[test]
fn loss_non_increasing_on_separable_task() {
    let data = separable_set(64);
    let cfg = ModelConfig {
        classes: 4,
        epochs: 15,
        ..ModelConfig::default()
    };
    let (_, report) = train(&cfg, &data, &[]).unwrap();
    for w in report.epoch_losses.windows(2) {
        assert!(w[1] <= w[0], "{:?}", report.epoch_losses);
    }
    assert_eq!(report.train_accuracy, 1.0);
}

#[test]
fn training_is_deterministic() {
    let data = make_dataset(60, 8, FrameRateMode::Variable, 1).unwrap();
    let test = make_dataset(20, 8, FrameRateMode::Variable, 2).unwrap();
    let cfg = ModelConfig {
        epochs: 2,
        time_encoding: TimeEncoding::Itt,
        ..ModelConfig::default()
    };
    let (_, a) = train(&cfg, &data, &test).unwrap();
    let (_, b) = train(&cfg, &data, &test).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.epoch_losses.iter().all(|l| l.is_finite()));
    assert!((0.0..=1.0).contains(&a.train_accuracy));
}

#[test]
fn divergence_is_reported() {
    let data = make_dataset(30, 8, FrameRateMode::Variable, 1).unwrap();
    let cfg = ModelConfig {
        epochs: 3,
        learning_rate: 1e300,
        ..ModelConfig::default()
    };
    assert!(matches!(
        train(&cfg, &data, &[]),
        Err(octav_toy::TrainError::Diverged { .. })
    ));
}

#[test]
fn empty_and_out_of_range_data_rejected() {
    let cfg = ModelConfig::default();
    assert!(matches!(train(&cfg, &[], &[]), Err(octav_toy::TrainError::EmptyDataset)));
    let data = make_dataset(5, 8, FrameRateMode::Uniform, 1).unwrap();
    let small = ModelConfig { classes: 2, ..cfg };
    assert!(train(&small, &data, &[]).is_err());
}

#[test]
fn experiment_is_seeded_and_holds_out_a_distinct_split() {
    let cfg = ModelConfig { epochs: 1, ..ModelConfig::default() };
    let exp = ExperimentConfig { train_size: 30, test_size: 30, frame_rate: FrameRateMode::Variable };
    let a = run_experiment(&cfg, &exp).unwrap();
    assert_eq!(a, run_experiment(&cfg, &exp).unwrap());
    let b = run_experiment(&ModelConfig { seed: 1, ..cfg.clone() }, &exp).unwrap();
    assert_ne!(a.epoch_losses, b.epoch_losses);
    let train = make_dataset(30, cfg.classes, FrameRateMode::Variable, cfg.seed).unwrap();
    assert!(train.iter().all(|s| !make_dataset(30, cfg.classes, FrameRateMode::Variable, cfg.seed ^ 0x7e57_da7a)
        .unwrap()
        .contains(s)));
    assert!(run_experiment(&cfg, &ExperimentConfig { train_size: 0, ..exp }).is_err());
}
