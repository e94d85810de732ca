//! Independent check of a generated record against its source manifest.

use octav_core::{parse_intervals, TimeInterval};

use crate::anchor::Trim;
use crate::dialogue::Role;
use crate::manifest::{CaptionManifest, SoundLibrary};
use crate::pipeline::{GenConfig, OctavRecord};

/// Slack for timestamps printed with one decimal.
const PRINT_TOLERANCE: f64 = 0.05;
const EPS: f64 = 1e-9;

fn close(a: &TimeInterval, b: &TimeInterval) -> bool {
    (a.start() - b.start()).abs() <= PRINT_TOLERANCE && (a.end() - b.end()).abs() <= PRINT_TOLERANCE
}

/// Check every constraint a sound-anchored record promises: span within T,
/// each gap in (0, m), overlays filling exactly their gaps without overlap,
/// trims consistent with the sound lengths, and every printed span matching
/// a known interval inside the chunk. Returns the first violation.
pub fn verify_record(
    r: &OctavRecord,
    source: &CaptionManifest,
    library: &SoundLibrary,
    cfg: &GenConfig,
) -> Result<(), String> {
    let fail = |msg: String| Err(format!("{}: {msg}", r.id));
    let dur = r.chunk.duration();
    if dur > cfg.t_max {
        return fail(format!("span {dur} exceeds T = {}", cfg.t_max));
    }
    for e in &r.events {
        let Some(global) = source.entries.iter().find(|g| g.caption == e.caption) else {
            return fail(format!("caption `{}` is not in the manifest", e.caption));
        };
        if (global.interval.start() - r.chunk.start() - e.interval.start()).abs() > EPS {
            return fail(format!("caption `{}` is not shifted to the chunk origin", e.caption));
        }
        if e.interval.end() > dur + EPS {
            return fail(format!("caption `{}` ends after the chunk", e.caption));
        }
    }
    if !r.edits.mute {
        return fail("original audio is not muted".into());
    }
    if r.events.is_empty() || r.edits.overlays.len() != r.events.len() - 1 {
        return fail(format!("{} overlays for {} captions", r.edits.overlays.len(), r.events.len()));
    }
    for (o, w) in r.edits.overlays.iter().zip(r.events.windows(2)) {
        let gap = w[1].interval.start() - w[0].interval.end();
        if !(gap > 0.0 && gap < cfg.m) {
            return fail(format!("gap {gap} outside (0, {})", cfg.m));
        }
        if (o.interval.start() - w[0].interval.end()).abs() > EPS
            || (o.interval.end() - w[1].interval.start()).abs() > EPS
        {
            return fail(format!("overlay {:?} does not fill its gap", o.interval));
        }
        let Some(sound) = library.get(&o.sound_id) else {
            return fail(format!("unknown sound `{}`", o.sound_id));
        };
        if sound.label != o.label {
            return fail(format!("overlay label `{}` differs from sound `{}`", o.label, sound.label));
        }
        let trim_ok = match o.trim {
            Trim::CutToGap => sound.duration > gap,
            Trim::LoopToGap => {
                o.repeats >= 1
                    && sound.duration < gap
                    && sound.duration * f64::from(o.repeats) >= gap - EPS
                    && sound.duration * f64::from(o.repeats - 1) < gap
            }
            Trim::None => (sound.duration - gap).abs() < 1e-6,
        };
        if !trim_ok {
            return fail(format!("trim {:?} x{} inconsistent with sound {} in gap {gap}", o.trim, o.repeats, sound.duration));
        }
    }
    for (a, b) in r.edits.overlays.iter().zip(r.edits.overlays.iter().skip(1)) {
        if a.interval.overlaps(&b.interval) {
            return fail("overlays overlap".into());
        }
    }
    let known: Vec<TimeInterval> = r
        .events
        .iter()
        .map(|e| e.interval)
        .chain(r.edits.overlays.iter().map(|o| o.interval))
        .collect();
    for (i, t) in r.turns.iter().enumerate() {
        let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
        if t.role != expected {
            return fail(format!("turn {i} has the wrong role"));
        }
        if t.role != Role::Assistant {
            continue;
        }
        let parsed = parse_intervals(&t.text);
        if parsed.malformed > 0 {
            return fail(format!("turn {i} has a malformed span"));
        }
        for iv in parsed.intervals {
            if iv.end() > dur + PRINT_TOLERANCE {
                return fail(format!("span {iv:?} lies outside the chunk"));
            }
            if !known.iter().any(|k| close(k, &iv)) {
                return fail(format!("span {iv:?} matches no caption or overlay"));
            }
        }
    }
    Ok(())
}
