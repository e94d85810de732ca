//! Recall@1 over intervals and the two components of the offline judge.

use std::collections::HashMap;

use octav_core::{iou, TimeInterval};

use crate::EvalError;

/// Fraction of items whose prediction reaches `threshold` IoU with its
/// reference. Empty input yields 0 with a warning.
pub fn recall_at_1(
    predictions: &[TimeInterval],
    references: &[TimeInterval],
    threshold: f64,
) -> Result<f64, EvalError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(EvalError::Threshold(threshold));
    }
    if predictions.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    if predictions.is_empty() {
        log::warn!("recall@1 over an empty set is reported as 0");
        return Ok(0.0);
    }
    let hits = predictions
        .iter()
        .zip(references)
        .filter(|(p, r)| iou(p, r) >= threshold)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// One-to-one matching of predicted to reference spans, taking pairs greedily
/// in decreasing IoU. Returns the summed IoU of matched pairs divided by the
/// larger list length, so missing and surplus spans both count as zero.
pub fn interval_agreement(predicted: &[TimeInterval], reference: &[TimeInterval]) -> f64 {
    let denom = predicted.len().max(reference.len());
    if denom == 0 {
        return 1.0;
    }
    let mut pairs: Vec<(f64, usize, usize)> = predicted
        .iter()
        .enumerate()
        .flat_map(|(i, p)| reference.iter().enumerate().map(move |(j, r)| (iou(p, r), i, j)))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_r = vec![false; reference.len()];
    let mut total = 0.0;
    for (score, i, j) in pairs {
        if !used_p[i] && !used_r[j] {
            used_p[i] = true;
            used_r[j] = true;
            total += score;
        }
    }
    total / denom as f64
}

/// Lower-cased alphanumeric words.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Multiset token F1. Two empty texts agree fully.
pub fn token_f1(predicted: &str, reference: &str) -> f64 {
    let (p, r) = (tokens(predicted), tokens(reference));
    if p.is_empty() && r.is_empty() {
        return 1.0;
    }
    if p.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / r.len() as f64;
    2.0 * precision * recall / (precision + recall)
}
