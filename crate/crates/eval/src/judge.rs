//! 0-5 answer scoring: an offline interval/text blend or a remote judge.

use octav_core::client::CompletionClient;
use octav_core::parse_intervals;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::{interval_agreement, token_f1};
use crate::EvalError;

pub const DEFAULT_THRESHOLD: u8 = 3;
pub const MAX_SCORE: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeMode {
    Deterministic,
    LlmClient,
}

impl JudgeMode {
    pub fn name(self) -> &'static str {
        match self {
            JudgeMode::Deterministic => "deterministic",
            JudgeMode::LlmClient => "llm-client",
        }
    }
}

impl std::str::FromStr for JudgeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deterministic" => Ok(Self::Deterministic),
            "llm-client" => Ok(Self::LlmClient),
            other => Err(format!("unknown judge mode `{other}` (deterministic|llm-client)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub score: u8,
    pub accurate: bool,
}

impl JudgeScore {
    pub fn new(score: u8, threshold: u8) -> Self {
        Self { score, accurate: score >= threshold }
    }
}

/// `round(5 * (0.5 * intervals + 0.5 * text))`, where `intervals` is the
/// one-to-one IoU agreement of the parsed spans and `text` the token F1 of
/// the remaining words. When neither side contains a span the score is
/// `round(5 * text)`.
pub fn deterministic_score(prediction: &str, reference: &str) -> u8 {
    let (p, r) = (parse_intervals(prediction), parse_intervals(reference));
    let text = token_f1(&p.residual_text, &r.residual_text);
    let blend = if p.intervals.is_empty() && r.intervals.is_empty() {
        text
    } else {
        0.5 * interval_agreement(&p.intervals, &r.intervals) + 0.5 * text
    };
    (f64::from(MAX_SCORE) * blend).round() as u8
}

pub fn judge_prompt(prediction: &str, reference: &str) -> String {
    format!(
        "You are evaluating answers about events in a video and its audio, including their start and end timestamps.\n\
         Compare the predicted answer with the correct answer and rate the prediction with an integer score of 0 to 5 \
         indicating its accuracy, where 5 is fully correct.\n\
         Correct answer: {reference}\n\
         Predicted answer: {prediction}\n\
         Reply only with a JSON object of the form {{\"score\": <integer>}}."
    )
}

/// Read and range-check the `score` field of a judge response.
pub fn parse_judge_response(response: &Value) -> Result<u8, EvalError> {
    response
        .get("score")
        .and_then(Value::as_u64)
        .filter(|s| *s <= u64::from(MAX_SCORE))
        .map(|s| s as u8)
        .ok_or_else(|| EvalError::BadScore(response.to_string()))
}

pub enum Judge<'a> {
    Deterministic,
    Client(&'a dyn CompletionClient),
}

impl Judge<'_> {
    pub fn mode(&self) -> JudgeMode {
        match self {
            Judge::Deterministic => JudgeMode::Deterministic,
            Judge::Client(_) => JudgeMode::LlmClient,
        }
    }

    /// Score `prediction` against a non-empty `reference`.
    pub fn score(&self, prediction: &str, reference: &str, threshold: u8) -> Result<JudgeScore, EvalError> {
        if reference.trim().is_empty() {
            return Err(EvalError::EmptyReference);
        }
        let score = match self {
            Judge::Deterministic => deterministic_score(prediction, reference),
            Judge::Client(client) => {
                let response = client.complete(&judge_prompt(prediction, reference))?;
                parse_judge_response(&response)?
            }
        };
        Ok(JudgeScore::new(score, threshold))
    }
}

/// Score with the offline judge.
pub fn judge(prediction: &str, reference: &str, threshold: u8) -> Result<JudgeScore, EvalError> {
    Judge::Deterministic.score(prediction, reference, threshold)
}
