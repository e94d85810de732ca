//! Optional JSON config file. Every key is optional; command-line flags
//! override it and built-in defaults fill whatever neither sets.

use std::path::Path;

use octav_eval::{JudgeMode, SpanRule};
use octav_toy::{FrameRateMode, TimeEncoding};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub m: Option<f64>,
    #[serde(rename = "T")]
    pub t_max: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub llm_endpoint: Option<String>,
    pub jobs: Option<usize>,
    pub max_per_start: Option<usize>,
    pub equal_label_prob: Option<f64>,
    pub negative_labels: Option<Vec<String>>,
    pub time_encoding: Option<TimeEncoding>,
    pub frame_rate: Option<FrameRateMode>,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub dim: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub hidden: Option<usize>,
    pub classes: Option<usize>,
    pub rotary_base: Option<f64>,
    pub judge_mode: Option<JudgeMode>,
    pub threshold: Option<u8>,
    pub span_rule: Option<SpanRule>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
