use octav_core::rotary::{pair_frequencies, rotate_in_place};
use octav_core::{
    apply_rotary, apply_rotary_backward, assemble, audio_window_midpoints, interleave, iou,
    parse_intervals, relative_score, remap_to_local, render_interval, time_token_index,
    EmbeddingMatrix, PositionMode, PromptSpec, RotaryTimeConfig, TimeInterval, TimeTokenBudget,
    TokenKind, TokenStream,
};
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = TimeInterval> {
    (0.0..100.0f64, 0.0..50.0f64).prop_map(|(s, d)| TimeInterval::new(s, s + d).unwrap())
}

/// Nearest integer by exhaustive search; ties go to the larger candidate.
fn nearest_index_brute_force(tau: f64, duration: f64, k: usize) -> usize {
    let target = tau / duration * (k - 1) as f64;
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for cand in 0..k {
        let d = (target - cand as f64).abs();
        if d <= best_dist {
            best = cand;
            best_dist = d;
        }
    }
    best
}

#[test]
fn time_token_index_matches_brute_force_on_grid() {
    for (duration, k) in [(30.0, 100), (1.0, 2), (7.5, 10)] {
        let budget = TimeTokenBudget::new(k, duration).unwrap();
        for step in 0..10_000 {
            let tau = duration * step as f64 / 9_999.0;
            assert_eq!(
                time_token_index(tau, &budget).unwrap(),
                nearest_index_brute_force(tau, duration, k),
                "tau={tau} T={duration} K={k}"
            );
        }
    }
}

#[test]
fn interleaved_audio_midpoints_of_15s_clip() {
    let mids = audio_window_midpoints(15.0, 3.0).unwrap();
    let budget = TimeTokenBudget::new(100, 15.0).unwrap();
    let stream =
        TokenStream::of_kind(TokenKind::Audio, mids.iter().enumerate().map(|(i, &t)| (i, t))).unwrap();
    let out = interleave(&stream, &budget).unwrap();
    let ids: Vec<_> = out
        .tokens()
        .iter()
        .filter(|t| t.kind == TokenKind::Time)
        .map(|t| t.payload)
        .collect();
    let expected: Vec<_> = mids
        .iter()
        .map(|&t| nearest_index_brute_force(t, 15.0, 100))
        .collect();
    assert_eq!(expected, vec![10, 30, 50, 69, 89]);
    assert_eq!(ids, expected);
}

#[test]
fn time_token_coverage() {
    for (duration, k) in [(30.0, 100), (1.0, 2), (7.5, 10)] {
        let budget = TimeTokenBudget::new(k, duration).unwrap();
        let n = 10 * k;
        let mut seen = vec![false; k];
        for step in 0..n {
            let tau = duration * step as f64 / (n - 1) as f64;
            seen[time_token_index(tau, &budget).unwrap()] = true;
        }
        assert!(seen.iter().all(|&s| s), "T={duration} K={k}");
    }
}

fn finite_difference_jacobian(values: &[f64], timestamps: &[f64], cfg: &RotaryTimeConfig) -> Vec<Vec<f64>> {
    let rows = timestamps.len();
    let cols = cfg.dim();
    let h = 1e-5;
    let eval = |v: Vec<f64>| {
        let m = EmbeddingMatrix::new(rows, cols, v, timestamps.to_vec()).unwrap();
        apply_rotary(&m, cfg).unwrap().values().to_vec()
    };
    (0..values.len())
        .map(|i| {
            let mut plus = values.to_vec();
            let mut minus = values.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let (fp, fm) = (eval(plus), eval(minus));
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

#[test]
fn rotary_backward_matches_finite_differences() {
    let cfg = RotaryTimeConfig::new(6, 100.0, PositionMode::AbsoluteTime).unwrap();
    let timestamps = vec![0.0, 1.37, 12.5];
    let values: Vec<f64> = (0..18).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
    let m = EmbeddingMatrix::new(3, 6, values.clone(), timestamps.clone()).unwrap();
    // column i of the Jacobian = d out / d in_i; row j via VJP with unit vectors
    let fd = finite_difference_jacobian(&values, &timestamps, &cfg);
    for j in 0..values.len() {
        let mut unit = vec![0.0; values.len()];
        unit[j] = 1.0;
        let analytic = apply_rotary_backward(&m, &unit, &cfg).unwrap();
        for i in 0..values.len() {
            let num = fd[i][j];
            let err = (analytic[i] - num).abs() / analytic[i].abs().max(num.abs()).max(1e-8);
            let abs_err = (analytic[i] - num).abs();
            assert!(err < 1e-4 || abs_err < 1e-10, "d out[{j}] / d in[{i}]: {} vs {num}", analytic[i]);
        }
    }
}

proptest! {
    #[test]
    fn iou_is_symmetric(a in interval(), b in interval()) {
        prop_assert_eq!(iou(&a, &b), iou(&b, &a));
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn iou_self_is_one(a in interval()) {
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn remap_preserves_duration(origin in 0.0..100.0f64, offset in 0.0..100.0f64, d in 0.0..50.0f64) {
        let g = TimeInterval::new(origin + offset, origin + offset + d).unwrap();
        let local = remap_to_local(&g, origin).unwrap();
        prop_assert_eq!(local.duration(), g.duration());
    }

    #[test]
    fn midpoints_increasing_and_inside(duration in 0.1..200.0f64, w in 0.1..20.0f64) {
        let mids = audio_window_midpoints(duration, w).unwrap();
        prop_assert!(!mids.is_empty());
        prop_assert!(mids.windows(2).all(|p| p[0] < p[1]));
        prop_assert!(mids.iter().all(|&m| (0.0..=duration).contains(&m)));
    }

    #[test]
    fn time_token_monotone(duration in 0.5..120.0f64, k in 2usize..300, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let budget = TimeTokenBudget::new(k, duration).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ka = time_token_index(lo * duration, &budget).unwrap();
        let kb = time_token_index(hi * duration, &budget).unwrap();
        prop_assert!(ka <= kb);
        prop_assert!(kb < k);
    }

    #[test]
    fn time_token_round_trip_bound(duration in 0.5..120.0f64, k in 2usize..300, a in 0.0..1.0f64) {
        let budget = TimeTokenBudget::new(k, duration).unwrap();
        let tau = a * duration;
        let back = budget.timestamp_of(time_token_index(tau, &budget).unwrap());
        prop_assert!((back - tau).abs() <= duration / (2.0 * (k - 1) as f64) + 1e-12);
    }

    #[test]
    fn interleave_doubles_and_preserves_order(ts in prop::collection::vec(0.0..30.0f64, 0..40)) {
        let mut ts = ts;
        ts.sort_by(f64::total_cmp);
        let budget = TimeTokenBudget::new(100, 30.0).unwrap();
        let stream = TokenStream::of_kind(TokenKind::Video, ts.iter().enumerate().map(|(i, &t)| (i, t))).unwrap();
        let out = interleave(&stream, &budget).unwrap();
        prop_assert_eq!(out.len(), 2 * stream.len());
        for (i, pair) in out.tokens().chunks(2).enumerate() {
            prop_assert_eq!(pair[0], stream.tokens()[i]);
            prop_assert_eq!(pair[1].kind, TokenKind::Time);
        }
    }

    #[test]
    fn rotary_shift_invariance(
        q in prop::collection::vec(-1.0..1.0f64, 32),
        k in prop::collection::vec(-1.0..1.0f64, 32),
        t1 in 0.0..100.0f64, t2 in 0.0..100.0f64, c in 0.0..100.0f64,
    ) {
        let cfg = RotaryTimeConfig::absolute(32).unwrap();
        let a = relative_score(&q, &k, t1, t2, &cfg).unwrap();
        let b = relative_score(&q, &k, t1 + c, t2 + c, &cfg).unwrap();
        prop_assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn rotary_isometry(rows in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 8), 1..6), base in 2.0..20000.0f64) {
        let ts: Vec<f64> = (0..rows.len()).map(|i| i as f64 * 1.7).collect();
        let m = EmbeddingMatrix::from_rows(&rows, ts).unwrap();
        let cfg = RotaryTimeConfig::new(8, base, PositionMode::AbsoluteTime).unwrap();
        let out = apply_rotary(&m, &cfg).unwrap();
        for i in 0..m.rows() {
            let n0: f64 = m.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            let n1: f64 = out.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n0 - n1).abs() <= 1e-9 * n0.max(1e-300));
        }
    }

    #[test]
    fn rotary_mode_equivalence(rows in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 4), 1..10)) {
        let ts: Vec<f64> = (0..rows.len()).map(|i| i as f64).collect();
        let m = EmbeddingMatrix::from_rows(&rows, ts).unwrap();
        let abs = apply_rotary(&m, &RotaryTimeConfig::new(4, 100.0, PositionMode::AbsoluteTime).unwrap()).unwrap();
        let idx = apply_rotary(&m, &RotaryTimeConfig::new(4, 100.0, PositionMode::TokenIndex).unwrap()).unwrap();
        prop_assert_eq!(abs.values(), idx.values());
    }

    #[test]
    fn rotate_helper_matches_matrix_path(row in prop::collection::vec(-3.0..3.0f64, 6), t in 0.0..50.0f64) {
        let cfg = RotaryTimeConfig::new(6, 100.0, PositionMode::AbsoluteTime).unwrap();
        let m = EmbeddingMatrix::from_rows(std::slice::from_ref(&row), vec![t]).unwrap();
        let mut r = row.clone();
        rotate_in_place(&mut r, t, &pair_frequencies(6, 100.0));
        let out = apply_rotary(&m, &cfg).unwrap();
        prop_assert_eq!(out.values(), &r[..]);
    }

    #[test]
    fn render_then_parse_is_identity(ivs in prop::collection::vec(interval(), 0..6)) {
        let text = ivs.iter().map(render_interval).collect::<Vec<_>>().join(" and then ");
        let parsed = parse_intervals(&text);
        prop_assert_eq!(parsed.intervals.len(), ivs.len());
        for (p, o) in parsed.intervals.iter().zip(&ivs) {
            prop_assert!((p.start() - o.start()).abs() <= 0.05 + 1e-9);
            prop_assert!((p.end() - o.end()).abs() <= 0.05 + 1e-9);
        }
    }

    #[test]
    fn prompt_markers_balanced(has_video: bool, has_audio: bool, joint: bool, v in 0usize..5, a in 0usize..5) {
        let spec = PromptSpec {
            system_prompt: "sys".into(),
            question: "q".into(),
            has_video,
            has_audio,
            joint,
            video_token_count: v,
            audio_token_count: a,
        };
        let Ok(out) = assemble(&spec) else {
            prop_assert!(joint);
            return Ok(());
        };
        let count = |m: &str| out.matches(m).count();
        prop_assert_eq!(count("<vi_start>"), count("<vi_end>"));
        prop_assert_eq!(count("<so_start>"), count("<so_end>"));
        prop_assert_eq!(count("<vis_start>"), count("<vis_end>"));
        if v > 0 && has_video {
            // exactly one wrapper around the video patches
            prop_assert_eq!(count("<vi_start>") + count("<vis_start>"), 1);
        }
        prop_assert!(out.starts_with("User: sys q"));
        prop_assert!(out.ends_with(" Assistant:"));
        if joint {
            prop_assert_eq!(count("<vi_start>") + count("<so_start>"), 0);
        }
    }
}
