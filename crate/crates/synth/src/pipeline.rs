//! Whole-corpus generation: per-video seeding, selection caps, records.

use std::collections::BTreeMap;

use octav_core::client::CompletionClient;
use octav_core::{TimeInterval, TimedCaption};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::anchor::{anchor_sounds, AnchorError, Anchored, AudioEditPlan};
use crate::dialogue::{
    convert_av_annotations_mt, generate_mt_dialogue, generate_st_qa, split_annotations, AvAnnotation,
    DialogueError, Direction, SoundMention, Turn, DEFAULT_NEGATIVE_LABELS,
};
use crate::manifest::{CaptionManifest, ManifestError, SoundLibrary};
use crate::paraphrase::{paraphrase_via_llm, ParaphraseStatus, UNPARAPHRASED_FLAG};
use crate::select::{select_transition_pairs, select_transition_triples};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("video `{video}`: {source}")]
    Anchor { video: String, source: AnchorError },
    #[error("video `{video}`: {source}")]
    Dialogue { video: String, source: DialogueError },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Largest allowed gap between the selected captions (exclusive).
    pub m: f64,
    /// Longest allowed chunk span.
    #[serde(rename = "T")]
    pub t_max: f64,
    pub seed: u64,
    /// Selections kept per starting caption; 0 keeps all.
    pub max_per_start: usize,
    /// Chance that the second sound of a multi-turn chunk reuses the first
    /// sound's label.
    pub equal_label_prob: f64,
    /// Absent sounds the refusal turn may name.
    pub negative_labels: Vec<String>,
    /// Worker threads; 0 uses the default pool.
    pub jobs: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            m: 10.0,
            t_max: 30.0,
            seed: 0,
            max_per_start: 1,
            equal_label_prob: 0.3,
            negative_labels: DEFAULT_NEGATIVE_LABELS.iter().map(|s| s.to_string()).collect(),
            jobs: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(SynthError::Config(format!("m must be positive, got {}", self.m)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(SynthError::Config(format!("T must be positive, got {}", self.t_max)));
        }
        if !(0.0..=1.0).contains(&self.equal_label_prob) {
            return Err(SynthError::Config(format!(
                "equal_label_prob must lie in [0, 1], got {}",
                self.equal_label_prob
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "ST")]
    SingleTurn,
    #[serde(rename = "MT")]
    MultiTurn,
}

/// One generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OctavRecord {
    pub id: String,
    pub video_id: String,
    /// Source-video seconds.
    pub chunk: TimeInterval,
    /// Chunk-local captions.
    pub events: Vec<TimedCaption>,
    pub edits: AudioEditPlan,
    pub turns: Vec<Turn>,
    pub variant: Variant,
    /// Real annotated sounds (converted records only), chunk-local.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audio_events: Vec<SoundMention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl OctavRecord {
    /// Sounds the dialogue talks about: overlays or annotated audio events.
    pub fn sounds(&self) -> Vec<SoundMention> {
        if self.audio_events.is_empty() {
            self.edits
                .overlays
                .iter()
                .map(|o| SoundMention { interval: o.interval, label: o.label.clone() })
                .collect()
        } else {
            self.audio_events.clone()
        }
    }

    /// Concatenated assistant turns.
    pub fn reference_answer(&self) -> String {
        self.turns
            .iter()
            .filter(|t| t.role == crate::dialogue::Role::Assistant)
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Stable per-video seed: SHA-256 over the run seed and the video id.
pub fn video_seed(seed: u64, video_id: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(video_id.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Keep at most `cap` selections per starting index (seeded choice), in
/// ascending order.
fn cap_per_start<T: Clone + Ord>(
    selections: Vec<T>,
    start: impl Fn(&T) -> usize,
    cap: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<T> {
    if cap == 0 {
        return selections;
    }
    let mut groups: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    for s in selections {
        groups.entry(start(&s)).or_default().push(s);
    }
    let mut kept: Vec<T> = groups
        .into_values()
        .flat_map(|mut g| {
            g.shuffle(rng);
            g.truncate(cap);
            g
        })
        .collect();
    kept.sort();
    kept
}

fn run_parallel<I: Sync, O: Send>(
    items: &[I],
    jobs: usize,
    f: impl Fn(&I) -> Result<Vec<O>, SynthError> + Sync + Send,
) -> Result<Vec<O>, SynthError> {
    let work = || -> Result<Vec<O>, SynthError> {
        let per_item: Vec<Result<Vec<O>, SynthError>> = items.par_iter().map(&f).collect();
        let mut out = Vec::new();
        for r in per_item {
            out.extend(r?);
        }
        Ok(out)
    };
    if jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SynthError::Pool(e.to_string()))?
            .install(work)
    }
}

fn finish_record(
    mut record: OctavRecord,
    client: Option<&dyn CompletionClient>,
    extra_labels: &[String],
) -> OctavRecord {
    let sounds = record.sounds();
    let mut labels: Vec<String> = sounds.iter().map(|s| s.label.clone()).collect();
    labels.extend(extra_labels.iter().cloned());
    let out = paraphrase_via_llm(&record.turns, &record.events, &sounds, &labels, client);
    record.turns = out.turns;
    if let ParaphraseStatus::Rejected(_) = out.status {
        record.flags.push(UNPARAPHRASED_FLAG.to_string());
    }
    record
}

fn anchored_record(
    id: String,
    video: &CaptionManifest,
    anchored: Anchored,
    turns: Vec<Turn>,
    variant: Variant,
) -> OctavRecord {
    OctavRecord {
        id,
        video_id: video.video_id.clone(),
        chunk: anchored.chunk,
        events: anchored.timeline.events().to_vec(),
        edits: anchored.plan,
        turns,
        variant,
        audio_events: Vec::new(),
        flags: Vec::new(),
    }
}

fn validate_inputs(manifests: &[CaptionManifest], library: &SoundLibrary, cfg: &GenConfig) -> Result<(), SynthError> {
    cfg.validate()?;
    library.validate()?;
    manifests.iter().try_for_each(CaptionManifest::validate)?;
    Ok(())
}

/// Single-turn records: one sound in the gap of a caption pair.
pub fn generate_st(
    manifests: &[CaptionManifest],
    library: &SoundLibrary,
    cfg: &GenConfig,
    client: Option<&dyn CompletionClient>,
) -> Result<Vec<OctavRecord>, SynthError> {
    validate_inputs(manifests, library, cfg)?;
    run_parallel(manifests, cfg.jobs, |video| {
        let mut rng = ChaCha8Rng::seed_from_u64(video_seed(cfg.seed, &video.video_id));
        let pairs = select_transition_pairs(video, cfg.m, cfg.t_max);
        let pairs = cap_per_start(pairs, |p| p.0, cfg.max_per_start, &mut rng);
        pairs
            .into_iter()
            .map(|(i, j)| {
                let anchored = anchor_sounds(&[i, j], video, library, rng.random(), cfg.equal_label_prob)
                    .map_err(|source| SynthError::Anchor { video: video.video_id.clone(), source })?;
                let direction = if rng.random::<bool>() { Direction::Before } else { Direction::After };
                let turns = generate_st_qa(&anchored.timeline, &anchored.plan, rng.random(), direction)
                    .map_err(|source| SynthError::Dialogue { video: video.video_id.clone(), source })?;
                let id = format!("{}-st-{i}-{j}", video.video_id);
                let record = anchored_record(id, video, anchored, turns, Variant::SingleTurn);
                Ok(finish_record(record, client, &[]))
            })
            .collect()
    })
}

/// Multi-turn records: two sounds in the gaps of a caption triple.
pub fn generate_mt(
    manifests: &[CaptionManifest],
    library: &SoundLibrary,
    cfg: &GenConfig,
    client: Option<&dyn CompletionClient>,
) -> Result<Vec<OctavRecord>, SynthError> {
    validate_inputs(manifests, library, cfg)?;
    run_parallel(manifests, cfg.jobs, |video| {
        let mut rng = ChaCha8Rng::seed_from_u64(video_seed(cfg.seed, &video.video_id));
        let triples = select_transition_triples(video, cfg.m, cfg.t_max);
        let triples = cap_per_start(triples, |t| t.0, cfg.max_per_start, &mut rng);
        triples
            .into_iter()
            .map(|(i, j, k)| {
                let anchored = anchor_sounds(&[i, j, k], video, library, rng.random(), cfg.equal_label_prob)
                    .map_err(|source| SynthError::Anchor { video: video.video_id.clone(), source })?;
                let turns = generate_mt_dialogue(&anchored.timeline, &anchored.plan, rng.random(), &cfg.negative_labels)
                    .map_err(|source| SynthError::Dialogue { video: video.video_id.clone(), source })?;
                let id = format!("{}-mt-{i}-{j}-{k}", video.video_id);
                let record = anchored_record(id, video, anchored, turns, Variant::MultiTurn);
                Ok(finish_record(record, client, &cfg.negative_labels))
            })
            .collect()
    })
}

/// Annotated audio-visual events of one video, in video seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedVideo {
    pub video_id: String,
    pub annotations: Vec<AvAnnotation>,
}

/// One record per annotated video, over its real sounds; the whole video is
/// the chunk and nothing is muted or inserted.
pub fn convert_mt(
    videos: &[AnnotatedVideo],
    cfg: &GenConfig,
    client: Option<&dyn CompletionClient>,
) -> Result<Vec<OctavRecord>, SynthError> {
    cfg.validate()?;
    run_parallel(videos, cfg.jobs, |video| {
        let seed = video_seed(cfg.seed, &video.video_id);
        let turns = convert_av_annotations_mt(&video.annotations, seed, &cfg.negative_labels)
            .map_err(|source| SynthError::Dialogue { video: video.video_id.clone(), source })?;
        let (events, audio_events) = split_annotations(&video.annotations);
        let end = video
            .annotations
            .iter()
            .map(|a| a.interval.end())
            .fold(0.0, f64::max);
        let variant = if turns.len() > 2 { Variant::MultiTurn } else { Variant::SingleTurn };
        let record = OctavRecord {
            id: format!("{}-av", video.video_id),
            video_id: video.video_id.clone(),
            chunk: TimeInterval::new(0.0, end).expect("non-negative end"),
            events,
            edits: AudioEditPlan { mute: false, overlays: Vec::new() },
            turns,
            variant,
            audio_events,
            flags: Vec::new(),
        };
        Ok(vec![finish_record(record, client, &cfg.negative_labels)])
    })
}
