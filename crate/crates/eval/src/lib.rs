//! Evaluation of timestamped answers: span parsing, Recall@1 at IoU
//! thresholds and 0-5 judge scores aggregated into a JSON report.

pub mod judge;
pub mod metrics;
pub mod report;

use octav_core::client::ClientError;
use thiserror::Error;

pub use judge::{deterministic_score, judge, Judge, JudgeMode, JudgeScore, DEFAULT_THRESHOLD};
pub use metrics::{interval_agreement, recall_at_1, token_f1};
pub use octav_core::{parse_intervals, ParsedAnswer};
pub use report::{align, evaluate_dataset, EvalConfig, EvalReport, Prediction, SpanRule, VariantSummary};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {references} references")]
    LengthMismatch { predictions: usize, references: usize },
    #[error("IoU threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("reference answer is empty")]
    EmptyReference,
    #[error("no prediction for record `{0}`")]
    MissingPrediction(String),
    #[error("prediction id `{0}` appears twice")]
    DuplicatePrediction(String),
    #[error("judge returned no integer score in 0..=5: {0}")]
    BadScore(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("thread pool: {0}")]
    Pool(String),
}
