use octav_core::PromptError;
use octav_eval::EvalError;
use octav_synth::SynthError;
use octav_toy::{GradCheckError, TrainError};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    GradCheck(#[from] GradCheckError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("gradient check failed for {0}")]
    CheckFailed(String),
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Prompt(_)
            | CliError::GradCheck(_)
            | CliError::Synth(SynthError::Config(_))
            | CliError::Train(TrainError::Config(_))
            | CliError::Eval(EvalError::Threshold(_)) => EXIT_USAGE,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            _ => EXIT_FAILURE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Input { .. } => "input",
            CliError::Synth(_) => "generation",
            CliError::Eval(_) => "evaluation",
            CliError::Train(_) => "training",
            CliError::GradCheck(_) => "grad-check",
            CliError::Prompt(_) => "prompt",
            CliError::CheckFailed(_) => "check-failed",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        json!({"error": {"kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}}).to_string()
    }
}
