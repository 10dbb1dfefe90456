//! Threshold-swept precision/recall/F1 against multi-annotator gold labels.
//!
//! Predictions carry a shared score; the evaluator picks, independently for
//! the long-answer and short-answer tasks, the score threshold that
//! maximizes F1. A prediction counts as non-null at threshold τ iff its
//! score is strictly greater than τ, and the sweep domain is the set of
//! distinct observed scores plus +∞ — F1 is piecewise-constant between
//! observed scores, so nothing outside that set can do better. Ties in F1
//! resolve toward the higher (more conservative) threshold.
//!
//! Matching is exact: a long answer must equal some annotator's long span,
//! a short answer set must equal some annotator's short span set. Gold
//! yes/no verdicts count toward recall denominators but can never be
//! matched, since this pipeline's decoder always emits span answers.

use log::warn;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::HashMap;

use crate::corpus::{Example, TokenSpan, YesNo};
use crate::decoder::Prediction;
use crate::error::{Error, Result};

/// The two evaluation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Long,
    Short,
}

/// One annotator's short-task answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShortGoldAnswer {
    /// Non-empty set of spans, kept sorted for set comparison.
    Spans(Vec<TokenSpan>),
    /// A yes/no verdict; unmatchable by span predictions.
    Verdict(YesNo),
}

/// Aggregated gold for one example and task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gold {
    /// Fewer than `min_annotators` annotators found an answer.
    Null,
    /// Each long-non-null annotator's long span.
    LongSpans(Vec<TokenSpan>),
    /// Each short-non-null annotator's answer.
    ShortAnswers(Vec<ShortGoldAnswer>),
}

impl Gold {
    pub fn is_null(&self) -> bool {
        matches!(self, Gold::Null)
    }
}

/// The annotator-count threshold for treating gold as non-null: 2 when an
/// example carries a five-way annotation, 1 otherwise, unless overridden.
pub fn effective_min_annotators(example: &Example, override_min: Option<usize>) -> usize {
    override_min.unwrap_or(if example.annotations.len() >= 5 { 2 } else { 1 })
}

/// Aggregate one example's annotations into a gold label for a task.
pub fn gold_label(example: &Example, task: Task, min_annotators: usize) -> Gold {
    match task {
        Task::Long => {
            let spans: Vec<TokenSpan> = example
                .annotations
                .iter()
                .filter_map(|a| a.long_span)
                .collect();
            if spans.len() >= min_annotators {
                Gold::LongSpans(spans)
            } else {
                Gold::Null
            }
        }
        Task::Short => {
            let answers: Vec<ShortGoldAnswer> = example
                .annotations
                .iter()
                .filter_map(|a| {
                    if !a.short_spans.is_empty() {
                        let mut spans = a.short_spans.clone();
                        spans.sort();
                        Some(ShortGoldAnswer::Spans(spans))
                    } else if a.yes_no != YesNo::None {
                        Some(ShortGoldAnswer::Verdict(a.yes_no))
                    } else {
                        None
                    }
                })
                .collect();
            if answers.len() >= min_annotators {
                Gold::ShortAnswers(answers)
            } else {
                Gold::Null
            }
        }
    }
}

/// Whether a prediction's answer matches any annotator in the gold set.
pub fn matches(prediction: &Prediction, gold: &Gold) -> bool {
    match gold {
        Gold::Null => false,
        Gold::LongSpans(spans) => match &prediction.long_answer {
            Some(long) => spans.contains(long),
            None => false,
        },
        Gold::ShortAnswers(answers) => {
            if prediction.short_answers.is_empty() {
                return false;
            }
            let mut predicted = prediction.short_answers.clone();
            predicted.sort();
            answers.iter().any(|a| match a {
                ShortGoldAnswer::Spans(spans) => *spans == predicted,
                ShortGoldAnswer::Verdict(_) => false,
            })
        }
    }
}

/// One example's contribution to a sweep: its prediction score (`None` for
/// a missing prediction, which no threshold can admit), whether the
/// prediction carries an answer for this task at all, whether it matches
/// gold, and whether gold is non-null.
///
/// A prediction that is null for the task (no long span / no short spans)
/// stays null at every threshold — its score still serves as a sweep sample
/// point, but it never counts as predicted-non-null.
#[derive(Debug, Clone, Copy)]
struct SweepEntry {
    score: Option<f64>,
    non_null: bool,
    matched: bool,
    gold_non_null: bool,
}

fn ser_threshold<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    // +∞ (the admit-nothing threshold) has no JSON literal; use null.
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_threshold<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Metrics for one task at its best threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    /// Threshold achieving the best F1; +∞ (serialized as null) means no
    /// prediction is admitted.
    #[serde(serialize_with = "ser_threshold", deserialize_with = "de_threshold")]
    pub best_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted_non_null: usize,
    pub gold_non_null: usize,
    /// True when no example has non-null gold, making recall undefined;
    /// recall is then recorded as 0.
    pub recall_undefined: bool,
}

/// One sweep point, emitted when the curve is requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(serialize_with = "ser_threshold", deserialize_with = "de_threshold")]
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full evaluation output: both tasks, plus per-task sweep curves when
/// requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub long: TaskReport,
    pub short: TaskReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub long_curve: Option<Vec<CurvePoint>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub short_curve: Option<Vec<CurvePoint>>,
}

/// Evaluation settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalConfig {
    /// Overrides the adaptive 2-of-5 / 1-of-1 rule when set.
    pub min_annotators: Option<usize>,
    /// Emit the full sweep curve in the report.
    pub dump_curve: bool,
}

fn prf(tp: usize, pred: usize, gold: usize) -> (f64, f64, f64) {
    let p = if pred > 0 { tp as f64 / pred as f64 } else { 0.0 };
    let r = if gold > 0 { tp as f64 / gold as f64 } else { 0.0 };
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

/// Sweep thresholds over one task's entries, returning the report at the
/// best threshold and (optionally) the whole curve.
fn sweep_entries(entries: &[SweepEntry], dump_curve: bool) -> (TaskReport, Option<Vec<CurvePoint>>) {
    let gold_total = entries.iter().filter(|e| e.gold_non_null).count();

    // Entries in descending score order; walking τ downward admits them in
    // this order (strictly-greater comparison).
    let mut scored: Vec<&SweepEntry> = entries.iter().filter(|e| e.score.is_some()).collect();
    scored.sort_by(|a, b| b.score.unwrap().partial_cmp(&a.score.unwrap()).expect("finite"));
    let mut thresholds: Vec<f64> = vec![f64::INFINITY];
    for e in &scored {
        let s = e.score.unwrap();
        if *thresholds.last().unwrap() != s {
            thresholds.push(s);
        }
    }

    let mut best: Option<TaskReport> = None;
    let mut curve = dump_curve.then(Vec::new);
    let (mut tp, mut pred) = (0usize, 0usize);
    let mut next = 0usize;
    for &tau in &thresholds {
        while next < scored.len() && scored[next].score.unwrap() > tau {
            // Task-null predictions pass the threshold but predict nothing:
            // they are walked past without entering the counts.
            if scored[next].non_null {
                pred += 1;
                if scored[next].matched && scored[next].gold_non_null {
                    tp += 1;
                }
            }
            next += 1;
        }
        let (p, r, f1) = prf(tp, pred, gold_total);
        if let Some(points) = curve.as_mut() {
            points.push(CurvePoint {
                threshold: tau,
                precision: p,
                recall: r,
                f1,
            });
        }
        let better = match &best {
            None => true,
            Some(b) => f1 > b.f1,
        };
        if better {
            best = Some(TaskReport {
                best_threshold: tau,
                precision: p,
                recall: r,
                f1,
                true_positives: tp,
                predicted_non_null: pred,
                gold_non_null: gold_total,
                recall_undefined: gold_total == 0,
            });
        }
    }
    (best.expect("thresholds always include +inf"), curve)
}

fn task_entries(
    examples: &[Example],
    by_id: &HashMap<i64, &Prediction>,
    task: Task,
    config: &EvalConfig,
) -> Vec<SweepEntry> {
    examples
        .iter()
        .map(|ex| {
            let min = effective_min_annotators(ex, config.min_annotators);
            let gold = gold_label(ex, task, min);
            match by_id.get(&ex.example_id) {
                Some(pred) => SweepEntry {
                    score: Some(pred.score),
                    non_null: match task {
                        Task::Long => pred.long_answer.is_some(),
                        Task::Short => !pred.short_answers.is_empty(),
                    },
                    matched: matches(pred, &gold),
                    gold_non_null: !gold.is_null(),
                },
                None => SweepEntry {
                    score: None,
                    non_null: false,
                    matched: false,
                    gold_non_null: !gold.is_null(),
                },
            }
        })
        .collect()
}

/// Evaluate predictions against a gold corpus on both tasks.
///
/// Every prediction must name a corpus example, and at most once; a gold
/// example without a prediction is charged as a permanent null (with a
/// warning), exactly as if its score were below every threshold.
pub fn evaluate(
    predictions: &[Prediction],
    examples: &[Example],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let known: HashMap<i64, ()> = examples.iter().map(|e| (e.example_id, ())).collect();
    let mut by_id: HashMap<i64, &Prediction> = HashMap::with_capacity(predictions.len());
    for pred in predictions {
        if !known.contains_key(&pred.example_id) {
            return Err(Error::Input(format!(
                "prediction for example {} which is not in the gold corpus",
                pred.example_id
            )));
        }
        if by_id.insert(pred.example_id, pred).is_some() {
            return Err(Error::Input(format!(
                "duplicate prediction for example {}",
                pred.example_id
            )));
        }
    }
    for ex in examples {
        if !by_id.contains_key(&ex.example_id) {
            warn!(
                "no prediction for example {}; counting it as null",
                ex.example_id
            );
        }
    }

    let (long, long_curve) =
        sweep_entries(&task_entries(examples, &by_id, Task::Long, config), config.dump_curve);
    let (short, short_curve) =
        sweep_entries(&task_entries(examples, &by_id, Task::Short, config), config.dump_curve);
    Ok(EvalReport {
        long,
        short,
        long_curve,
        short_curve,
    })
}
