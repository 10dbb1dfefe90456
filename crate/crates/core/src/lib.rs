//! Core library for a question-answering pipeline over long documents.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`corpus`] — parse and validate line-delimited corpus records.
//! 2. [`tokenizer`] — wordpiece tokenization with markup placeholder tokens.
//! 3. [`instance`] — sliding-window instance generation with training
//!    targets and deterministic null downsampling.
//! 4. [`scorer`] — a small trainable reference model emitting start/end/type
//!    logits per instance.
//! 5. [`decoder`] — log-odds span selection over the windows of a document.
//! 6. [`evaluator`] — threshold-swept precision/recall/F1 against
//!    multi-annotator gold labels.
//!
//! Everything is deterministic given a seed: hashing is [`hash::splitmix64`],
//! parallel sections preserve order, and floats serialize via the shortest
//! round-trip form.

/// Version of this library, for embedding in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod corpus;
pub mod decoder;
pub mod error;
pub mod evaluator;
pub mod hash;
pub mod instance;
pub mod jsonl;
pub mod scorer;
pub mod synthetic;
pub mod tokenizer;

pub use corpus::{
    parse_example, read_corpus, serialize_example, validate_corpus, Annotation, DocToken, Example,
    LongAnswerCandidate, TokenSpan, Violation, YesNo,
};
pub use decoder::{
    best_span, decode_corpus, g_score, read_predictions, select_long_answer, to_doc_span,
    DecodeConfig, Prediction, SpanCandidate,
};
pub use error::{Error, Result};
pub use evaluator::{evaluate, gold_label, matches, EvalConfig, EvalReport, Task, TaskReport};
pub use instance::{
    assign_targets, downsample, generate_windows, preprocess_corpus, preprocess_example,
    read_instances, AnswerType, GenConfig, Mode, TrainingInstance, Window,
};
pub use scorer::{
    forward, grad, loss, read_logits, score_instances, softmax, train, Logits, LogitsRecord,
    ModelParams, TrainConfig,
};
pub use tokenizer::{
    load_vocab, tokenize_document, tokenize_question, wordpiece, TokenizedDoc, TokenizerConfig,
    Vocab,
};
