//! Span decoding: from per-instance logits to one document-level prediction.
//!
//! Every content span (s, e) in a window is scored against that window's
//! `[CLS]` span by the log-odds score
//! `g = (f_start(s) − f_start(0)) + (f_end(e) − f_end(0))`, and the best
//! span across all of a document's windows becomes the predicted short
//! answer. The long answer is the smallest top-level candidate passage
//! containing it, and both share the same score, which the evaluator later
//! thresholds. The null span always competes at g = 0 and wins ties, so a
//! document whose every window favors `[CLS]` predicts no answer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Example, LongAnswerCandidate, TokenSpan};
use crate::error::{Error, Result};
use crate::instance::{AnswerType, TrainingInstance};
use crate::scorer::{softmax, LogitsRecord};

/// Decoding settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    /// Longest admissible span, in wordpieces.
    pub max_answer_wp: usize,
    /// Keep only this many best start and end positions per instance;
    /// `None` enumerates every pair (the oracle path).
    pub top_k: Option<usize>,
    /// Reject spans with a markup token strictly inside. Endpoints on
    /// markup are always rejected.
    pub forbid_interior_markup: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_answer_wp: 30,
            top_k: Some(20),
            forbid_interior_markup: false,
        }
    }
}

/// Log-odds of span (s, e) against the `[CLS]` span, computed in grouped
/// form so that `g(0, 0)` is exactly zero.
pub fn g_score(start_logits: &[f64], end_logits: &[f64], s: usize, e: usize) -> f64 {
    (start_logits[s] - start_logits[0]) + (end_logits[e] - end_logits[0])
}

/// The best span found for a document. `instance_idx` indexes the
/// document's instance list; the null result is `s = e = 0` with `g = 0` on
/// instance 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanCandidate {
    pub instance_idx: usize,
    pub s: usize,
    pub e: usize,
    pub g: f64,
}

impl SpanCandidate {
    pub const NULL: SpanCandidate = SpanCandidate {
        instance_idx: 0,
        s: 0,
        e: 0,
        g: 0.0,
    };

    /// The null span points at `[CLS]`; content spans never can, because
    /// position 0 maps to no document token.
    pub fn is_null(&self) -> bool {
        self.s == 0 && self.e == 0
    }
}

/// Deterministic preference order among equal-g content spans: earlier
/// document position first, then earlier window, then instance-local
/// positions (which only differ inside multi-piece tokens).
type TieKey = (i64, i64, usize, usize, usize);

fn tie_key(inst: &TrainingInstance, s: usize, e: usize) -> TieKey {
    (inst.wp_to_doc[s], inst.wp_to_doc[e], inst.window_start, s, e)
}

/// Positions eligible as span endpoints, optionally pruned to the `k`
/// highest-logit ones (ties prefer the earlier position).
fn endpoint_positions(inst: &TrainingInstance, logits: &[f64], k: Option<usize>) -> Vec<usize> {
    let mut positions: Vec<usize> = (0..inst.wp_to_doc.len())
        .filter(|&i| inst.wp_to_doc[i] >= 0)
        .collect();
    if let Some(k) = k {
        positions.sort_by(|&a, &b| {
            logits[b]
                .partial_cmp(&logits[a])
                .expect("finite logits")
                .then(a.cmp(&b))
        });
        positions.truncate(k);
        positions.sort_unstable();
    }
    positions
}

fn check_aligned(inst: &TrainingInstance, rec: &LogitsRecord) -> Result<()> {
    if rec.example_id != inst.example_id || rec.window_start != inst.window_start {
        return Err(Error::Alignment(format!(
            "logits for (example {}, window {}) paired with instance (example {}, window {})",
            rec.example_id, rec.window_start, inst.example_id, inst.window_start
        )));
    }
    if rec.start_logits.len() != inst.input_ids.len()
        || rec.end_logits.len() != inst.input_ids.len()
    {
        return Err(Error::Alignment(format!(
            "logits lengths ({}, {}) do not match instance length {} for (example {}, window {})",
            rec.start_logits.len(),
            rec.end_logits.len(),
            inst.input_ids.len(),
            inst.example_id,
            inst.window_start
        )));
    }
    if inst.wp_to_doc.len() != inst.input_ids.len() {
        return Err(Error::Alignment(format!(
            "instance (example {}, window {}) has wp_to_doc length {} for {} ids",
            inst.example_id,
            inst.window_start,
            inst.wp_to_doc.len(),
            inst.input_ids.len()
        )));
    }
    Ok(())
}

/// Highest-g span across all instances of one document.
///
/// Valid spans have both endpoints on content positions, `s ≤ e`, and
/// length at most `max_answer_wp`. The null span participates at `g = 0`
/// and is kept on ties, so the result is null iff no content span scores
/// strictly positive.
pub fn best_span(
    pairs: &[(&TrainingInstance, &LogitsRecord)],
    config: &DecodeConfig,
) -> Result<SpanCandidate> {
    if pairs.is_empty() {
        return Err(Error::Input(
            "best_span needs at least one instance".to_string(),
        ));
    }
    let mut best = SpanCandidate::NULL;
    let mut best_key: Option<TieKey> = None;

    for (idx, (inst, rec)) in pairs.iter().enumerate() {
        check_aligned(inst, rec)?;
        let starts = endpoint_positions(inst, &rec.start_logits, config.top_k);
        let ends = endpoint_positions(inst, &rec.end_logits, config.top_k);
        for &s in &starts {
            for &e in &ends {
                if e < s || e - s + 1 > config.max_answer_wp {
                    continue;
                }
                if config.forbid_interior_markup
                    && e > s
                    && inst.wp_to_doc[s + 1..e].iter().any(|&j| j < 0)
                {
                    continue;
                }
                let g = g_score(&rec.start_logits, &rec.end_logits, s, e);
                let key = tie_key(inst, s, e);
                let wins = if g > best.g {
                    true
                } else if g == best.g && !best.is_null() {
                    // Equal-g content spans fall back to the position order;
                    // the null span is never displaced at equal g.
                    best_key.is_none_or(|bk| key < bk)
                } else {
                    false
                };
                if wins {
                    best = SpanCandidate {
                        instance_idx: idx,
                        s,
                        e,
                        g,
                    };
                    best_key = Some(key);
                }
            }
        }
    }
    Ok(best)
}

/// Map instance positions back to a document-token span: inclusive start
/// token, exclusive end token. Endpoints must sit on content positions.
pub fn to_doc_span(inst: &TrainingInstance, s: usize, e: usize) -> Result<TokenSpan> {
    let (ds, de) = (inst.wp_to_doc[s], inst.wp_to_doc[e]);
    if ds < 0 || de < 0 {
        return Err(Error::Input(format!(
            "span endpoint ({s}, {e}) maps to no document token"
        )));
    }
    Ok(TokenSpan::new(ds as usize, de as usize + 1))
}

/// The smallest top-level candidate containing the span, if any. Nested
/// top-level candidates should not occur, but the smallest-then-earliest
/// order makes the choice deterministic anyway.
pub fn select_long_answer(
    doc_span: &TokenSpan,
    candidates: &[LongAnswerCandidate],
) -> Option<LongAnswerCandidate> {
    candidates
        .iter()
        .filter(|c| c.top_level && c.span.contains(doc_span))
        .min_by_key(|c| (c.span.len(), c.span.start_token))
        .copied()
}

/// One document-level prediction, in the wire layout of the predictions
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: i64,
    /// Zero spans (null prediction) or exactly one.
    pub short_answers: Vec<TokenSpan>,
    /// Containing top-level candidate, when one exists.
    pub long_answer: Option<TokenSpan>,
    /// The document's maximum g; shared by the long and short answers.
    pub score: f64,
    /// Softmax of the winning instance's type logits, in wire order.
    pub answer_type_probs: Vec<f64>,
    /// Always "NONE": this decoder never converts predictions to yes/no.
    pub yes_no_answer: String,
}

fn null_prediction(example_id: i64, type_probs: Vec<f64>) -> Prediction {
    Prediction {
        example_id,
        short_answers: vec![],
        long_answer: None,
        score: 0.0,
        answer_type_probs: type_probs,
        yes_no_answer: "NONE".to_string(),
    }
}

fn decode_document(
    example: &Example,
    pairs: &[(&TrainingInstance, &LogitsRecord)],
    config: &DecodeConfig,
) -> Result<Prediction> {
    if pairs.is_empty() {
        // No windows at all (empty document): nothing to score.
        let uniform = vec![1.0 / AnswerType::COUNT as f64; AnswerType::COUNT];
        return Ok(null_prediction(example.example_id, uniform));
    }
    let best = best_span(pairs, config)?;
    let type_probs = softmax(&pairs[best.instance_idx].1.type_logits);
    if best.is_null() {
        return Ok(null_prediction(example.example_id, type_probs));
    }
    let inst = pairs[best.instance_idx].0;
    let doc_span = to_doc_span(inst, best.s, best.e)?;
    Ok(Prediction {
        example_id: example.example_id,
        short_answers: vec![doc_span],
        long_answer: select_long_answer(&doc_span, &example.candidates).map(|c| c.span),
        score: best.g,
        answer_type_probs: type_probs,
        yes_no_answer: "NONE".to_string(),
    })
}

/// Decode a corpus: one prediction per example, in corpus order.
///
/// Instances and logits are matched by `(example_id, window_start)`; any
/// missing, duplicate, or length-mismatched record is an alignment error
/// naming the pair.
pub fn decode_corpus(
    instances: &[TrainingInstance],
    logits: &[LogitsRecord],
    examples: &[Example],
    config: &DecodeConfig,
) -> Result<Vec<Prediction>> {
    let mut by_key: HashMap<(i64, usize), &LogitsRecord> = HashMap::with_capacity(logits.len());
    for rec in logits {
        if by_key.insert((rec.example_id, rec.window_start), rec).is_some() {
            return Err(Error::Alignment(format!(
                "duplicate logits record for (example {}, window {})",
                rec.example_id, rec.window_start
            )));
        }
    }

    let mut by_example: HashMap<i64, Vec<&TrainingInstance>> = HashMap::new();
    let known: std::collections::HashSet<i64> = examples.iter().map(|e| e.example_id).collect();
    for inst in instances {
        if !known.contains(&inst.example_id) {
            return Err(Error::Alignment(format!(
                "instance references example {} absent from the corpus",
                inst.example_id
            )));
        }
        by_example.entry(inst.example_id).or_default().push(inst);
    }

    let mut matched = 0usize;
    let paired: Vec<(&Example, Vec<(&TrainingInstance, &LogitsRecord)>)> = examples
        .iter()
        .map(|ex| {
            let insts = by_example.remove(&ex.example_id).unwrap_or_default();
            let mut pairs = Vec::with_capacity(insts.len());
            for inst in insts {
                let rec = by_key.get(&(inst.example_id, inst.window_start)).ok_or_else(|| {
                    Error::Alignment(format!(
                        "no logits record for (example {}, window {})",
                        inst.example_id, inst.window_start
                    ))
                })?;
                pairs.push((inst, *rec));
                matched += 1;
            }
            Ok((ex, pairs))
        })
        .collect::<Result<_>>()?;
    if matched != logits.len() {
        return Err(Error::Alignment(format!(
            "{} logits records have no matching instance",
            logits.len() - matched
        )));
    }

    use rayon::prelude::*;
    paired
        .par_iter()
        .map(|(ex, pairs)| decode_document(ex, pairs, config))
        .collect()
}

/// Read a predictions file.
pub fn read_predictions(path: &std::path::Path) -> Result<Vec<Prediction>> {
    let records = crate::jsonl::read_file::<Prediction>(path)?;
    let mut out = Vec::new();
    for item in records {
        out.push(item?.1);
    }
    Ok(out)
}
