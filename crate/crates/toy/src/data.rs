//! Synthetic "what happens before/after the sound" samples.

use octav_core::TimeInterval;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Clip length in seconds.
pub const CLIP_SECONDS: f64 = 20.0;
/// Frames sampled per clip before dropping those inside the sound gap.
pub const FRAMES_PER_CLIP: usize = 10;
/// Audio window length in seconds.
pub const AUDIO_WINDOW_SECONDS: f64 = 2.0;
pub const SOUND_CLASSES: usize = 4;
const MAX_EVENTS: usize = 4;
const MIN_EVENT_SECONDS: f64 = 3.0;
const GAP_SECONDS: (f64, f64) = (1.5, 3.0);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataError {
    #[error("dataset size must be positive")]
    Empty,
    #[error("need at least 2 event classes, got {0}")]
    TooFewClasses(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameRateMode {
    Uniform,
    /// Inter-frame gaps drawn from a heavy-tailed distribution, so a frame's
    /// index says little about its timestamp.
    Variable,
}

impl std::str::FromStr for FrameRateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "variable" => Ok(Self::Variable),
            other => Err(format!("unknown frame-rate mode `{other}` (uniform|variable)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Query {
    Before,
    After,
}

impl Query {
    pub fn index(self) -> usize {
        match self {
            Query::Before => 0,
            Query::After => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameEvent {
    pub timestamp: f64,
    pub class: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundSpan {
    pub interval: TimeInterval,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub duration: f64,
    /// Sorted by timestamp.
    pub frame_events: Vec<FrameEvent>,
    pub sound: SoundSpan,
    pub query: Query,
    pub answer: usize,
}

/// Generate `n` samples over `classes` event classes. Deterministic in `seed`.
pub fn make_dataset(
    n: usize,
    classes: usize,
    mode: FrameRateMode,
    seed: u64,
) -> Result<Vec<SyntheticSample>, DataError> {
    if n == 0 {
        return Err(DataError::Empty);
    }
    if classes < 2 {
        return Err(DataError::TooFewClasses(classes));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sample_clip(&mut rng, classes, mode)).collect())
}

fn frame_times(rng: &mut ChaCha8Rng, mode: FrameRateMode) -> Vec<f64> {
    match mode {
        FrameRateMode::Uniform => (0..FRAMES_PER_CLIP)
            .map(|i| (i as f64 + 0.5) * CLIP_SECONDS / FRAMES_PER_CLIP as f64)
            .collect(),
        FrameRateMode::Variable => {
            let pareto = Pareto::new(1.0, 1.2).expect("pareto parameters");
            let gaps: Vec<f64> = (0..=FRAMES_PER_CLIP).map(|_| pareto.sample(rng)).collect();
            let total: f64 = gaps.iter().sum();
            gaps.iter()
                .take(FRAMES_PER_CLIP)
                .scan(0.0, |acc, g| {
                    *acc += g;
                    Some(*acc / total * CLIP_SECONDS)
                })
                .collect()
        }
    }
}

fn sample_clip(rng: &mut ChaCha8Rng, classes: usize, mode: FrameRateMode) -> SyntheticSample {
    let n_events = classes.min(MAX_EVENTS);
    loop {
        let mut pool: Vec<usize> = (0..classes).collect();
        pool.shuffle(rng);
        let event_classes = &pool[..n_events];

        let gap = rng.random_range(GAP_SECONDS.0..GAP_SECONDS.1);
        let spare = CLIP_SECONDS - gap - MIN_EVENT_SECONDS * n_events as f64;
        let weights: Vec<f64> = (0..n_events).map(|_| rng.random::<f64>() + 1e-3).collect();
        let wsum: f64 = weights.iter().sum();
        let gap_after = rng.random_range(0..n_events - 1);

        let mut events = Vec::with_capacity(n_events);
        let mut sound = None;
        let mut t = 0.0;
        for (i, w) in weights.iter().enumerate() {
            let len = MIN_EVENT_SECONDS + spare * w / wsum;
            events.push((t, (t + len).min(CLIP_SECONDS)));
            t += len;
            if i == gap_after {
                sound = Some((t, t + gap));
                t += gap;
            }
        }
        let (s0, s1) = sound.expect("gap placed");

        let frames: Vec<FrameEvent> = frame_times(rng, mode)
            .into_iter()
            .filter_map(|ts| {
                events
                    .iter()
                    .position(|&(a, b)| a <= ts && ts < b)
                    .map(|e| FrameEvent {
                        timestamp: ts,
                        class: event_classes[e],
                    })
            })
            .collect();
        let has_frame = |e: usize| frames.iter().any(|f| f.class == event_classes[e]);
        if !(has_frame(gap_after) && has_frame(gap_after + 1)) {
            continue;
        }

        let query = if rng.random::<bool>() {
            Query::Before
        } else {
            Query::After
        };
        let answer = match query {
            Query::Before => event_classes[gap_after],
            Query::After => event_classes[gap_after + 1],
        };
        return SyntheticSample {
            duration: CLIP_SECONDS,
            frame_events: frames,
            sound: SoundSpan {
                interval: TimeInterval::new(s0, s1).expect("valid gap"),
                class: rng.random_range(0..SOUND_CLASSES),
            },
            query,
            answer,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = make_dataset(1, 8, FrameRateMode::Uniform, 7).unwrap();
        let b = make_dataset(1, 8, FrameRateMode::Uniform, 7).unwrap();
        assert_eq!(a, b);
        let c = make_dataset(1, 8, FrameRateMode::Uniform, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(make_dataset(0, 8, FrameRateMode::Uniform, 0), Err(DataError::Empty));
        assert_eq!(
            make_dataset(3, 1, FrameRateMode::Uniform, 0),
            Err(DataError::TooFewClasses(1))
        );
    }

    #[test]
    fn answer_present_and_frames_sorted() {
        for mode in [FrameRateMode::Uniform, FrameRateMode::Variable] {
            for s in make_dataset(300, 8, mode, 3).unwrap() {
                assert!(s.frame_events.iter().any(|f| f.class == s.answer));
                assert!(s.frame_events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
                assert!(s.frame_events.iter().all(|f| (0.0..=s.duration).contains(&f.timestamp)));
                assert!(s.sound.interval.end() <= s.duration);
            }
        }
    }

    #[test]
    fn two_classes_still_work() {
        let data = make_dataset(50, 2, FrameRateMode::Variable, 11).unwrap();
        assert!(data.iter().all(|s| s.answer < 2));
    }
}
