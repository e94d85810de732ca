//! Instruction prompt layout with modality marker tokens.
//!
//! ```text
//! User: <system prompt> <question> <vi_start> <vi_patch>... <vi_end> Assistant:
//! ```
//!
//! Joint audio-video input is wrapped in `<vis_start> ... <vis_end>` with all
//! video patches before all audio patches, and the per-modality markers are
//! left out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VI_START: &str = "<vi_start>";
pub const VI_PATCH: &str = "<vi_patch>";
pub const VI_END: &str = "<vi_end>";
pub const SO_START: &str = "<so_start>";
pub const SO_PATCH: &str = "<so_patch>";
pub const SO_END: &str = "<so_end>";
pub const VIS_START: &str = "<vis_start>";
pub const VIS_END: &str = "<vis_end>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("joint layout requires both video and audio")]
    JointWithoutBothModalities,
    #[error("joint layout requires non-zero video and audio token counts (got {video} and {audio})")]
    JointWithZeroTokens { video: usize, audio: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_prompt: String,
    pub question: String,
    pub has_video: bool,
    pub has_audio: bool,
    pub joint: bool,
    pub video_token_count: usize,
    pub audio_token_count: usize,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.joint {
            if !(self.has_video && self.has_audio) {
                return Err(PromptError::JointWithoutBothModalities);
            }
            if self.video_token_count == 0 || self.audio_token_count == 0 {
                return Err(PromptError::JointWithZeroTokens {
                    video: self.video_token_count,
                    audio: self.audio_token_count,
                });
            }
        }
        Ok(())
    }
}

/// Render the prompt for `spec`. Tokens are separated by single spaces.
pub fn assemble(spec: &PromptSpec) -> Result<String, PromptError> {
    spec.validate()?;
    let mut parts: Vec<&str> = vec!["User:"];
    for text in [spec.system_prompt.trim(), spec.question.trim()] {
        if !text.is_empty() {
            parts.push(text);
        }
    }
    let video = std::iter::repeat_n(VI_PATCH, spec.video_token_count);
    let audio = std::iter::repeat_n(SO_PATCH, spec.audio_token_count);
    if spec.joint {
        parts.push(VIS_START);
        parts.extend(video);
        parts.extend(audio);
        parts.push(VIS_END);
    } else {
        if spec.has_video {
            parts.push(VI_START);
            parts.extend(video);
            parts.push(VI_END);
        }
        if spec.has_audio {
            parts.push(SO_START);
            parts.extend(audio);
            parts.push(SO_END);
        }
    }
    parts.push("Assistant:");
    Ok(parts.join(" "))
}
