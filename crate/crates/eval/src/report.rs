//! Dataset-level evaluation of predictions against generated records.

use std::collections::{BTreeMap, HashMap};

use octav_core::{parse_intervals, TimeInterval};
use octav_synth::{OctavRecord, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::judge::{Judge, JudgeMode, JudgeScore, DEFAULT_THRESHOLD};
use crate::metrics::recall_at_1;
use crate::EvalError;

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub text: String,
}

/// Which parsed span of an answer is its top-1 grounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanRule {
    First,
    /// The span closing the answer: the described event in single-turn
    /// answers, which state the sound span first.
    Last,
}

impl std::str::FromStr for SpanRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Self::First),
            "last" => Ok(Self::Last),
            other => Err(format!("unknown span rule `{other}` (first|last)")),
        }
    }
}

impl SpanRule {
    fn pick(self, text: &str) -> Option<TimeInterval> {
        let spans = parse_intervals(text).intervals;
        match self {
            SpanRule::First => spans.first().copied(),
            SpanRule::Last => spans.last().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Lowest judge score counted as accurate.
    pub threshold: u8,
    pub span_rule: SpanRule,
    /// Concurrent scoring workers (and in-flight judge requests); 0 uses the
    /// default pool.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, span_rule: SpanRule::Last, jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub n: usize,
    pub accuracy: f64,
    pub mean_score: f64,
    #[serde(rename = "r1_iou_0.5")]
    pub r1_iou_05: f64,
    #[serde(rename = "r1_iou_0.7")]
    pub r1_iou_07: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fraction of items with a judge score at or above the threshold.
    pub accuracy: f64,
    #[serde(rename = "r1_iou_0.5")]
    pub r1_iou_05: f64,
    #[serde(rename = "r1_iou_0.7")]
    pub r1_iou_07: f64,
    pub n: usize,
    pub judge_mode: JudgeMode,
    pub threshold: u8,
    pub mean_score: f64,
    /// Items whose reference contains a span; recall is taken over these.
    pub grounded: usize,
    pub span_rule: SpanRule,
    pub accuracy_rule: String,
    pub per_variant: BTreeMap<String, VariantSummary>,
}

struct Item {
    variant: Variant,
    score: JudgeScore,
    grounding: Option<(TimeInterval, Option<TimeInterval>)>,
}

/// Pair each record with its prediction: by position when the ids line up,
/// otherwise by id.
pub fn align<'a>(
    records: &'a [OctavRecord],
    predictions: &'a [Prediction],
) -> Result<Vec<(&'a OctavRecord, &'a Prediction)>, EvalError> {
    if records.len() != predictions.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), references: records.len() });
    }
    if records.iter().zip(predictions).all(|(r, p)| r.id == p.id) {
        return Ok(records.iter().zip(predictions).collect());
    }
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id.clone()));
        }
    }
    records
        .iter()
        .map(|r| {
            by_id
                .get(r.id.as_str())
                .map(|p| (r, *p))
                .ok_or_else(|| EvalError::MissingPrediction(r.id.clone()))
        })
        .collect()
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::SingleTurn => "ST",
        Variant::MultiTurn => "MT",
    }
}

fn summarize(items: &[&Item]) -> Result<(f64, f64, f64, f64), EvalError> {
    let n = items.len().max(1) as f64;
    let accuracy = items.iter().filter(|i| i.score.accurate).count() as f64 / n;
    let mean_score = items.iter().map(|i| f64::from(i.score.score)).sum::<f64>() / n;
    // a prediction without a span can never match; a zero-length placeholder
    // far from the reference stands in for it
    let (preds, refs): (Vec<TimeInterval>, Vec<TimeInterval>) = items
        .iter()
        .filter_map(|i| i.grounding)
        .map(|(r, p)| (p.unwrap_or_else(|| miss(&r)), r))
        .unzip();
    let r05 = recall_at_1(&preds, &refs, 0.5)?;
    let r07 = recall_at_1(&preds, &refs, 0.7)?;
    Ok((accuracy, mean_score, r05, r07))
}

fn miss(reference: &TimeInterval) -> TimeInterval {
    TimeInterval::new(reference.end() + 1.0, reference.end() + 1.0).expect("finite")
}

/// Score every prediction against its record's assistant turns.
pub fn evaluate_dataset(
    records: &[OctavRecord],
    predictions: &[Prediction],
    cfg: &EvalConfig,
    judge: &Judge<'_>,
) -> Result<EvalReport, EvalError> {
    let pairs = align(records, predictions)?;
    let score = |(record, prediction): &(&OctavRecord, &Prediction)| -> Result<Item, EvalError> {
        let reference = record.reference_answer();
        let score = judge.score(&prediction.text, &reference, cfg.threshold)?;
        let grounding = cfg
            .span_rule
            .pick(&reference)
            .map(|r| (r, cfg.span_rule.pick(&prediction.text)));
        Ok(Item { variant: record.variant, score, grounding })
    };
    let run = || pairs.par_iter().map(score).collect::<Result<Vec<Item>, EvalError>>();
    let items = if cfg.jobs == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| EvalError::Pool(e.to_string()))?
            .install(run)?
    };

    let all: Vec<&Item> = items.iter().collect();
    let (accuracy, mean_score, r1_iou_05, r1_iou_07) = summarize(&all)?;
    let mut per_variant = BTreeMap::new();
    for v in [Variant::SingleTurn, Variant::MultiTurn] {
        let group: Vec<&Item> = items.iter().filter(|i| i.variant == v).collect();
        if group.is_empty() {
            continue;
        }
        let (accuracy, mean_score, r1_iou_05, r1_iou_07) = summarize(&group)?;
        per_variant.insert(
            variant_name(v).to_string(),
            VariantSummary { n: group.len(), accuracy, mean_score, r1_iou_05, r1_iou_07 },
        );
    }
    Ok(EvalReport {
        accuracy,
        r1_iou_05,
        r1_iou_07,
        n: items.len(),
        judge_mode: judge.mode(),
        threshold: cfg.threshold,
        mean_score,
        grounded: items.iter().filter(|i| i.grounding.is_some()).count(),
        span_rule: cfg.span_rule,
        accuracy_rule: format!("score >= {}", cfg.threshold),
        per_variant,
    })
}
