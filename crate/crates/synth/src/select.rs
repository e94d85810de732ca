//! Caption transitions that can host an inserted sound.

use crate::manifest::CaptionManifest;

fn gap_ok(manifest: &CaptionManifest, i: usize, j: usize, m: f64) -> bool {
    let gap = manifest.interval(j).start() - manifest.interval(i).end();
    gap > 0.0 && gap < m
}

fn span(manifest: &CaptionManifest, first: usize, last: usize) -> f64 {
    manifest.interval(last).end() - manifest.interval(first).start()
}

/// All pairs `i < j` whose gap `start_j - end_i` lies in `(0, m)` and whose
/// span from `start_i` to `end_j` is at most `t_max`.
pub fn select_transition_pairs(manifest: &CaptionManifest, m: f64, t_max: f64) -> Vec<(usize, usize)> {
    let n = manifest.entries.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if gap_ok(manifest, i, j, m) && span(manifest, i, j) <= t_max {
                out.push((i, j));
            }
        }
    }
    out
}

/// All triples `i < j < k` with both consecutive gaps in `(0, m)` and span
/// at most `t_max`.
pub fn select_transition_triples(
    manifest: &CaptionManifest,
    m: f64,
    t_max: f64,
) -> Vec<(usize, usize, usize)> {
    let n = manifest.entries.len();
    let mut out = Vec::new();
    for (i, j) in select_transition_pairs(manifest, m, t_max) {
        for k in j + 1..n {
            if gap_ok(manifest, j, k, m) && span(manifest, i, k) <= t_max {
                out.push((i, j, k));
            }
        }
    }
    out
}
