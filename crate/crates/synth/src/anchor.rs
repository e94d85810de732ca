//! Sound anchoring: choose a chunk around a caption transition, mute it and
//! overlay sampled sounds into the caption gaps.

use octav_core::{ClipTimeline, TimeInterval, TimecodeError};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{CaptionManifest, SoundEvent, SoundLibrary};

/// Durations closer than this count as equal when fitting a sound to a gap.
const FIT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnchorError {
    #[error("sound library is empty")]
    EmptyLibrary,
    #[error("selection {0:?} must hold at least two increasing entry indices")]
    BadSelection(Vec<usize>),
    #[error("entries {0} and {1} leave no gap for a sound")]
    NoGap(usize, usize),
    #[error("overlay {index} [{start}, {end}] is outside the chunk or overlaps another")]
    BadOverlay { index: usize, start: f64, end: f64 },
    #[error("unknown sound id `{0}`")]
    UnknownSound(String),
    #[error(transparent)]
    Timecode(#[from] TimecodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trim {
    None,
    CutToGap,
    LoopToGap,
}

/// One sound placed on the chunk timeline (chunk-local seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub sound_id: String,
    pub label: String,
    #[serde(flatten)]
    pub interval: TimeInterval,
    pub trim: Trim,
    /// Times the source sound is played to fill the interval.
    pub repeats: u32,
}

impl Overlay {
    /// Fit `sound` to exactly cover `gap`.
    pub fn fit(sound: &SoundEvent, gap: TimeInterval) -> Self {
        let len = gap.duration();
        let (trim, repeats) = if (sound.duration - len).abs() <= FIT_EPS {
            (Trim::None, 1)
        } else if sound.duration > len {
            (Trim::CutToGap, 1)
        } else {
            (Trim::LoopToGap, (len / sound.duration - FIT_EPS).ceil() as u32)
        };
        Self {
            sound_id: sound.id.clone(),
            label: sound.label.clone(),
            interval: gap,
            trim,
            repeats,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioEditPlan {
    /// Drop the chunk's original audio track.
    pub mute: bool,
    pub overlays: Vec<Overlay>,
}

impl AudioEditPlan {
    /// Overlays must lie in `[0, duration]` and be pairwise disjoint.
    pub fn validate(&self, duration: f64) -> Result<(), AnchorError> {
        let bad = |index: usize, o: &Overlay| AnchorError::BadOverlay {
            index,
            start: o.interval.start(),
            end: o.interval.end(),
        };
        for (index, o) in self.overlays.iter().enumerate() {
            if o.interval.end() > duration + FIT_EPS {
                return Err(bad(index, o));
            }
            for p in &self.overlays[..index] {
                if o.interval.overlaps(&p.interval) {
                    return Err(bad(index, o));
                }
            }
        }
        Ok(())
    }
}

/// A chunk of a source video prepared for sound insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchored {
    /// Source-video seconds.
    pub chunk: TimeInterval,
    pub timeline: ClipTimeline,
    pub plan: AudioEditPlan,
}

/// Cut the chunk spanning the selected entries, mute it and overlay one
/// sampled sound per gap between consecutive selected entries.
///
/// Sounds are drawn uniformly from the library. With probability
/// `equal_label_prob`, later sounds are instead drawn among sounds sharing
/// the first sound's label.
pub fn anchor_sounds(
    selection: &[usize],
    manifest: &CaptionManifest,
    library: &SoundLibrary,
    seed: u64,
    equal_label_prob: f64,
) -> Result<Anchored, AnchorError> {
    if library.sounds.is_empty() {
        return Err(AnchorError::EmptyLibrary);
    }
    let in_order = selection.windows(2).all(|w| w[0] < w[1]);
    if selection.len() < 2 || !in_order || selection[selection.len() - 1] >= manifest.entries.len() {
        return Err(AnchorError::BadSelection(selection.to_vec()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = manifest.interval(selection[0]);
    let last = manifest.interval(selection[selection.len() - 1]);
    let chunk = TimeInterval::new(first.start(), last.end())?;
    let timeline = ClipTimeline::from_global(
        &chunk,
        selection.iter().map(|&i| manifest.entries[i].clone()),
    )?;

    let mut overlays = Vec::with_capacity(selection.len() - 1);
    let mut first_label: Option<&str> = None;
    for w in timeline.events().windows(2) {
        let (a, b) = (w[0].interval, w[1].interval);
        if b.start() <= a.end() {
            return Err(AnchorError::NoGap(selection[0], selection[1]));
        }
        let gap = TimeInterval::new(a.end(), b.start())?;
        let sound = match first_label {
            Some(label) if rng.random_bool(equal_label_prob.clamp(0.0, 1.0)) => {
                let same: Vec<&SoundEvent> = library.sounds.iter().filter(|s| s.label == label).collect();
                *same.choose(&mut rng).expect("first sound has this label")
            }
            _ => library.sounds.choose(&mut rng).expect("non-empty library"),
        };
        first_label.get_or_insert(sound.label.as_str());
        overlays.push(Overlay::fit(sound, gap));
    }
    let plan = AudioEditPlan { mute: true, overlays };
    plan.validate(timeline.duration())?;
    Ok(Anchored { chunk, timeline, plan })
}

/// Arguments for an `ffmpeg` invocation that renders `plan` over the chunk of
/// `video_uri`. Nothing is executed here.
pub fn ffmpeg_args(
    plan: &AudioEditPlan,
    chunk: &TimeInterval,
    video_uri: &str,
    library: &SoundLibrary,
    out_path: &str,
) -> Result<Vec<String>, AnchorError> {
    let mut args: Vec<String> = vec![
        "-y".into(),
        "-ss".into(),
        format!("{:.3}", chunk.start()),
        "-t".into(),
        format!("{:.3}", chunk.duration()),
        "-i".into(),
        video_uri.into(),
    ];
    let mut filters = Vec::new();
    let mut mix = Vec::new();
    if !plan.mute {
        mix.push("[0:a]".to_string());
    }
    for (n, o) in plan.overlays.iter().enumerate() {
        let sound = library
            .get(&o.sound_id)
            .ok_or_else(|| AnchorError::UnknownSound(o.sound_id.clone()))?;
        if o.repeats > 1 {
            args.extend(["-stream_loop".into(), (o.repeats - 1).to_string()]);
        }
        args.extend(["-i".into(), sound.uri.clone()]);
        let delay_ms = (o.interval.start() * 1000.0).round() as u64;
        filters.push(format!(
            "[{}:a]atrim=0:{:.3},adelay={delay_ms}:all=1[s{n}]",
            n + 1,
            o.interval.duration()
        ));
        mix.push(format!("[s{n}]"));
    }
    if mix.is_empty() {
        args.extend(["-map".into(), "0:v".into(), "-an".into()]);
    } else {
        filters.push(format!(
            "{}amix=inputs={}:normalize=0,apad,atrim=0:{:.3}[aout]",
            mix.concat(),
            mix.len(),
            chunk.duration()
        ));
        args.extend([
            "-filter_complex".into(),
            filters.join(";"),
            "-map".into(),
            "0:v".into(),
            "-map".into(),
            "[aout]".into(),
        ]);
    }
    args.extend(["-c:v".into(), "copy".into(), out_path.into()]);
    Ok(args)
}
