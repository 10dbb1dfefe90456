//! Deterministic fixtures for the pipeline benchmarks.
//!
//! Every fixture is built from the core crate's seeded synthetic
//! generators, so the benchmarks measure identical inputs on every machine
//! and every run. Scores in the prediction fixture are spread over a small
//! range so the evaluator sweep has several thresholds to walk.

use nqpipe_core::synthetic::{scored_documents, synthetic_corpus, synthetic_vocab};
use nqpipe_core::{
    preprocess_corpus, Example, GenConfig, LogitsRecord, Mode, Prediction, TrainingInstance,
    Vocab,
};

/// Fixed fixture seed; arbitrary.
const SEED: u64 = 0xbe;

/// The vocabulary that tokenizes every synthetic corpus.
pub fn vocab_fixture() -> Vocab {
    Vocab::from_entries(synthetic_vocab()).expect("synthetic vocab is well-formed")
}

/// A corpus of `examples` synthetic records.
pub fn corpus_fixture(examples: usize) -> Vec<Example> {
    synthetic_corpus(examples, SEED)
}

/// Training-mode instances preprocessed from [`corpus_fixture`].
pub fn instance_fixture(examples: usize) -> Vec<TrainingInstance> {
    preprocess_corpus(
        &corpus_fixture(examples),
        &vocab_fixture(),
        &GenConfig::default(),
        Mode::Train,
    )
    .expect("synthetic corpus preprocesses cleanly")
}

/// Per-document instance/logits pairs, ready for span decoding.
pub fn scored_fixture(documents: usize) -> Vec<Vec<(TrainingInstance, LogitsRecord)>> {
    scored_documents(documents, SEED)
}

/// Predictions that echo each example's own annotation. Null annotations
/// become null predictions with score 0, anchoring the sweep grid's bottom
/// threshold so that every other prediction is admitted somewhere.
pub fn prediction_fixture(examples: &[Example]) -> Vec<Prediction> {
    examples
        .iter()
        .map(|ex| {
            let ann = &ex.annotations[0];
            let score = if ann.is_null() {
                0.0
            } else {
                1.0 + (ex.example_id % 7) as f64
            };
            Prediction {
                example_id: ex.example_id,
                short_answers: ann.short_spans.clone(),
                long_answer: ann.long_span,
                score,
                answer_type_probs: vec![0.2; 5],
                yes_no_answer: "NONE".to_string(),
            }
        })
        .collect()
}
