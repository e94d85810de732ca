//! Core building blocks for audio-visual temporal grounding.
//!
//! - [`timecode`]: intervals, IoU, chunk-local remapping and audio window midpoints.
//! - [`rotary`]: rotary embeddings driven by absolute timestamps (or token indices).
//! - [`time_tokens`]: discrete time tokens and stream interleaving.
//! - [`prompt`]: the instruction prompt layout with modality markers.
//! - [`spans`]: rendering and parsing of `[a, b]` timestamp spans in text.
//! - [`client`]: the JSON-over-HTTP completion client shared by generation and judging.

pub mod client;
pub mod prompt;
pub mod rotary;
pub mod spans;
pub mod time_tokens;
pub mod timecode;

pub use prompt::{assemble, PromptError, PromptSpec};
pub use rotary::{
    apply_rotary, apply_rotary_backward, frequency_schedule, relative_score, EmbeddingMatrix,
    PositionMode, RotaryError, RotaryTimeConfig,
};
pub use spans::{parse_intervals, render_interval, ParsedAnswer};
pub use time_tokens::{
    interleave, time_token_index, TimeTokenBudget, TimeTokenError, Token, TokenKind, TokenStream,
};
pub use timecode::{
    audio_window_midpoints, iou, remap_to_local, ClipTimeline, TimeInterval, TimecodeError,
    TimedCaption,
};
