//! A small attention network built from scratch to compare temporal
//! encodings on a synthetic cross-modal retrieval task.
//!
//! Each sample is a clip with captioned video events, one inserted sound and
//! a question asking which event happens right before (or after) the sound.
//! Frames are sampled at uniform or irregular times; audio is split into
//! fixed windows. Answering requires relating audio and video tokens by
//! their timestamps.

pub mod data;
pub mod gradcheck;
pub mod model;
pub mod train;

pub use data::{make_dataset, DataError, FrameEvent, FrameRateMode, Query, SoundSpan, SyntheticSample};
pub use gradcheck::{grad_check, small_config, GradCheckError};
pub use model::{ConfigError, Model, ModelConfig, ModelInput, TimeEncoding, TokenContent};
pub use train::{evaluate, run_experiment, train, ExperimentConfig, TrainError, TrainReport};
