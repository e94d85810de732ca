//! Input manifests: captioned source videos and the sound library.

use std::collections::HashSet;

use octav_core::{TimeInterval, TimedCaption};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifestError {
    #[error("video `{video}`: entry {index} has an empty caption")]
    EmptyCaption { video: String, index: usize },
    #[error("video `{video}`: entries {first} and {second} are unsorted or overlap")]
    Overlap {
        video: String,
        first: usize,
        second: usize,
    },
    #[error("video id must be non-empty")]
    EmptyVideoId,
    #[error("sound `{0}`: label must be non-empty")]
    EmptyLabel(String),
    #[error("sound `{id}`: duration must be positive, got {duration}")]
    BadDuration { id: String, duration: f64 },
    #[error("duplicate sound id `{0}`")]
    DuplicateSound(String),
    #[error("sound library is empty")]
    EmptyLibrary,
}

/// Captions of one source video, in source-video seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionManifest {
    pub video_id: String,
    pub entries: Vec<TimedCaption>,
}

impl CaptionManifest {
    /// Checks entries are non-empty, sorted by start and non-overlapping.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.video_id.trim().is_empty() {
            return Err(ManifestError::EmptyVideoId);
        }
        for (index, e) in self.entries.iter().enumerate() {
            if e.caption.trim().is_empty() {
                return Err(ManifestError::EmptyCaption {
                    video: self.video_id.clone(),
                    index,
                });
            }
        }
        for (first, w) in self.entries.windows(2).enumerate() {
            if w[1].interval.start() < w[0].interval.end() {
                return Err(ManifestError::Overlap {
                    video: self.video_id.clone(),
                    first,
                    second: first + 1,
                });
            }
        }
        Ok(())
    }

    pub fn interval(&self, i: usize) -> TimeInterval {
        self.entries[i].interval
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoundCorpus {
    Urbansound8k,
    Esc50,
    Fsd50k,
    Nonspeech7k,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundEvent {
    pub id: String,
    pub label: String,
    /// Seconds.
    pub duration: f64,
    pub uri: String,
    pub corpus: SoundCorpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundLibrary {
    pub sounds: Vec<SoundEvent>,
}

impl SoundLibrary {
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.sounds.is_empty() {
            return Err(ManifestError::EmptyLibrary);
        }
        let mut seen = HashSet::new();
        for s in &self.sounds {
            if s.label.trim().is_empty() {
                return Err(ManifestError::EmptyLabel(s.id.clone()));
            }
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(ManifestError::BadDuration {
                    id: s.id.clone(),
                    duration: s.duration,
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(ManifestError::DuplicateSound(s.id.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&SoundEvent> {
        self.sounds.iter().find(|s| s.id == id)
    }
}
