//! Interval and timestamp algebra shared by every other module.
//!
//! All times are seconds as `f64`. A [`TimeInterval`] may have zero length
//! (a point event); its start is never negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimecodeError {
    #[error("invalid interval [{start}, {end}]: {reason}")]
    InvalidInterval {
        start: f64,
        end: f64,
        reason: &'static str,
    },
    #[error("interval starts at {start} which is before the origin {origin}")]
    BeforeOrigin { start: f64, origin: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("timeline event {index} [{start}, {end}] lies outside [0, {duration}]")]
    EventOutOfRange {
        index: usize,
        start: f64,
        end: f64,
        duration: f64,
    },
    #[error("timeline events {first} and {second} are unsorted or overlap")]
    EventsOverlap { first: usize, second: usize },
}

/// A closed time span `[start, end]` in seconds.
///
/// Stored as start plus length so that shifting an interval keeps its
/// duration bit-exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct TimeInterval {
    start: f64,
    len: f64,
}

#[derive(Serialize, Deserialize)]
struct RawInterval {
    start: f64,
    end: f64,
}

impl From<TimeInterval> for RawInterval {
    fn from(iv: TimeInterval) -> Self {
        RawInterval {
            start: iv.start,
            end: iv.end(),
        }
    }
}

impl TryFrom<RawInterval> for TimeInterval {
    type Error = TimecodeError;

    fn try_from(raw: RawInterval) -> Result<Self, Self::Error> {
        TimeInterval::new(raw.start, raw.end)
    }
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self, TimecodeError> {
        let reason = if !start.is_finite() || !end.is_finite() {
            Some("bounds must be finite")
        } else if start < 0.0 {
            Some("start must be non-negative")
        } else if end < start {
            Some("end precedes start")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(TimecodeError::InvalidInterval { start, end, reason }),
            None => Ok(Self {
                start,
                len: end - start,
            }),
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.len
    }

    pub fn duration(&self) -> f64 {
        self.len
    }

    pub fn midpoint(&self) -> f64 {
        self.start + 0.5 * self.len
    }

    /// Length of the overlap with `other` (0 when disjoint).
    pub fn intersection_len(&self, other: &TimeInterval) -> f64 {
        (self.end().min(other.end()) - self.start.max(other.start)).max(0.0)
    }

    pub fn contains(&self, other: &TimeInterval) -> bool {
        self.start <= other.start && other.end() <= self.end()
    }

    /// True when the two intervals share more than a boundary point.
    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.start.max(other.start) < self.end().min(other.end())
    }
}

/// Intersection over union of two intervals.
///
/// Returns 0 for disjoint intervals and when the union has zero length,
/// except that two identical points have IoU 1.
pub fn iou(a: &TimeInterval, b: &TimeInterval) -> f64 {
    let inter = a.intersection_len(b);
    let union = a.duration() + b.duration() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Shift an interval given in source-video seconds into chunk-local seconds.
pub fn remap_to_local(global: &TimeInterval, origin: f64) -> Result<TimeInterval, TimecodeError> {
    if global.start < origin {
        return Err(TimecodeError::BeforeOrigin {
            start: global.start,
            origin,
        });
    }
    Ok(TimeInterval {
        start: global.start - origin,
        len: global.len,
    })
}

/// Midpoints of consecutive non-overlapping audio windows of length
/// `window_len` covering `[0, duration]`. The last window is truncated at the
/// clip end.
pub fn audio_window_midpoints(duration: f64, window_len: f64) -> Result<Vec<f64>, TimecodeError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(TimecodeError::NonPositive {
            name: "duration",
            value: duration,
        });
    }
    if !(window_len > 0.0 && window_len.is_finite()) {
        return Err(TimecodeError::NonPositive {
            name: "window_len",
            value: window_len,
        });
    }
    // tolerate ratios like 2.9999999999999996 that should be an exact count
    let count = ((duration / window_len) - 1e-9).ceil().max(1.0) as usize;
    Ok((0..count)
        .map(|n| {
            let lo = n as f64 * window_len;
            let hi = ((n + 1) as f64 * window_len).min(duration);
            0.5 * (lo + hi)
        })
        .collect())
}

/// A caption attached to a time span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedCaption {
    #[serde(flatten)]
    pub interval: TimeInterval,
    pub caption: String,
}

/// A chunk of a source video with its captions in chunk-local seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTimeline {
    global_origin: f64,
    duration: f64,
    events: Vec<TimedCaption>,
}

impl ClipTimeline {
    /// Build a timeline from chunk-local events, checking they are sorted,
    /// non-overlapping and inside `[0, duration]`.
    pub fn new(
        global_origin: f64,
        duration: f64,
        events: Vec<TimedCaption>,
    ) -> Result<Self, TimecodeError> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(TimecodeError::NonPositive {
                name: "duration",
                value: duration,
            });
        }
        for (index, ev) in events.iter().enumerate() {
            if ev.interval.end() > duration + 1e-9 {
                return Err(TimecodeError::EventOutOfRange {
                    index,
                    start: ev.interval.start,
                    end: ev.interval.end(),
                    duration,
                });
            }
        }
        for (first, pair) in events.windows(2).enumerate() {
            if pair[1].interval.start < pair[0].interval.end() - 1e-9 {
                return Err(TimecodeError::EventsOverlap {
                    first,
                    second: first + 1,
                });
            }
        }
        Ok(Self {
            global_origin,
            duration,
            events,
        })
    }

    /// Build a timeline for the chunk `chunk` (source seconds) from events given
    /// in source seconds.
    pub fn from_global(
        chunk: &TimeInterval,
        events: impl IntoIterator<Item = TimedCaption>,
    ) -> Result<Self, TimecodeError> {
        let local = events
            .into_iter()
            .map(|ev| {
                Ok(TimedCaption {
                    interval: remap_to_local(&ev.interval, chunk.start())?,
                    caption: ev.caption,
                })
            })
            .collect::<Result<Vec<_>, TimecodeError>>()?;
        Self::new(chunk.start(), chunk.duration(), local)
    }

    pub fn global_origin(&self) -> f64 {
        self.global_origin
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn events(&self) -> &[TimedCaption] {
        &self.events
    }
}
