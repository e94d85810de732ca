//! Generation of sound-anchored audio-visual dialogue data.
//!
//! Captioned videos are scanned for caption transitions with a short gap;
//! the chunk around a transition is muted and a sampled sound is overlaid
//! into each gap. Template dialogues then ask what happens before or after
//! the sound, with answers carrying chunk-local timestamps.

pub mod anchor;
pub mod dialogue;
pub mod manifest;
pub mod paraphrase;
pub mod pipeline;
pub mod select;
pub mod verify;

pub use anchor::{anchor_sounds, ffmpeg_args, AnchorError, Anchored, AudioEditPlan, Overlay, Trim};
pub use dialogue::{
    convert_av_annotations_mt, generate_mt_dialogue, generate_st_qa, AvAnnotation, DialogueError, Direction,
    Modality, Role, SoundMention, Turn, DEFAULT_NEGATIVE_LABELS, INSTRUCTION_VARIANTS,
};
pub use manifest::{CaptionManifest, ManifestError, SoundCorpus, SoundEvent, SoundLibrary};
pub use paraphrase::{paraphrase_via_llm, ParaphraseStatus, Paraphrased, UNPARAPHRASED_FLAG};
pub use pipeline::{
    convert_mt, generate_mt, generate_st, video_seed, AnnotatedVideo, GenConfig, OctavRecord, SynthError, Variant,
};
pub use select::{select_transition_pairs, select_transition_triples};
pub use verify::verify_record;
