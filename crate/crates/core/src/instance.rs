//! Sliding-window instance generation with training targets.
//!
//! A tokenized document longer than one model input is cut into overlapping
//! windows starting at stride multiples. Each window becomes one instance
//! laid out `[CLS] question [SEP] window [SEP]`, labeled with a target span
//! `(s, e)` into the instance and an answer type. Windows that contain no
//! answer are "null" instances — they point at `[CLS]` — and are kept only
//! at a deterministic 1-in-`downsample_rate` hash selection so training data
//! stays roughly balanced.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Annotation, Example, TokenSpan, YesNo};
use crate::error::{Error, Result};
use crate::hash::splitmix64;
use crate::tokenizer::{tokenize_document, tokenize_question, TokenizedDoc, TokenizerConfig, Vocab};

/// The five target answer types, in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnswerType {
    Short = 0,
    Long = 1,
    Yes = 2,
    No = 3,
    NoAnswer = 4,
}

impl AnswerType {
    pub const COUNT: usize = 5;

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<AnswerType> {
        match i {
            0 => Some(AnswerType::Short),
            1 => Some(AnswerType::Long),
            2 => Some(AnswerType::Yes),
            3 => Some(AnswerType::No),
            4 => Some(AnswerType::NoAnswer),
            _ => None,
        }
    }
}

impl Serialize for AnswerType {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for AnswerType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let i = u8::deserialize(deserializer)?;
        AnswerType::from_index(i)
            .ok_or_else(|| D::Error::custom(format!("answer_type out of range: {i}")))
    }
}

/// Instance-generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    /// Maximum instance length, `[CLS]`/`[SEP]`s included.
    pub max_seq_len: usize,
    /// Distance between consecutive window starts, in doc wordpieces.
    pub stride: usize,
    /// Questions keep at most this many leading wordpieces.
    pub max_question_wp: usize,
    /// Null instances survive at a 1-in-this rate.
    pub downsample_rate: u64,
    /// Seed for the downsampling hash.
    pub seed: u64,
    pub tokenizer: TokenizerConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_seq_len: 512,
            stride: 128,
            max_question_wp: 64,
            downsample_rate: 50,
            seed: 0,
            tokenizer: TokenizerConfig::default(),
        }
    }
}

impl GenConfig {
    /// Check internal consistency. The capacity bound guarantees that even
    /// the longest allowed question leaves window room of at least one
    /// stride, which the coverage invariant of window generation needs.
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".to_string()));
        }
        if self.stride > self.max_seq_len {
            return Err(Error::Config(format!(
                "stride {} exceeds max_seq_len {}",
                self.stride, self.max_seq_len
            )));
        }
        if self.downsample_rate == 0 {
            return Err(Error::Config("downsample_rate must be at least 1".to_string()));
        }
        let overhead = self.max_question_wp + 3;
        if self.max_seq_len <= overhead || self.max_seq_len - overhead < self.stride {
            return Err(Error::Config(format!(
                "max_seq_len {} leaves window capacity below stride {} after {} overhead tokens",
                self.max_seq_len, self.stride, overhead
            )));
        }
        Ok(())
    }
}

/// Whether generation labels instances with training targets or emits
/// untargeted windows for decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// One window over the document's wordpieces: `[start, start + len)` in
/// doc-wordpiece coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    /// Whether an inclusive doc-wordpiece extent lies fully inside.
    fn contains(&self, span: &WpSpan) -> bool {
        span.first >= self.start && span.last < self.start + self.len
    }
}

/// An inclusive extent `[first, last]` in doc-wordpiece coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WpSpan {
    pub first: usize,
    pub last: usize,
}

/// One model input with its label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub example_id: i64,
    /// Doc-wordpiece offset of the window this instance holds.
    pub window_start: usize,
    /// `[CLS] question [SEP] window [SEP]`, at most `max_seq_len` ids; no
    /// padding is stored.
    pub input_ids: Vec<u32>,
    /// Per-position source document token, −1 for `[CLS]`, question,
    /// `[SEP]`s, and markup tokens. Same length as `input_ids`.
    pub wp_to_doc: Vec<i64>,
    /// Target span start, an index into `input_ids`.
    pub target_start: usize,
    /// Target span end, inclusive.
    pub target_end: usize,
    pub answer_type: AnswerType,
    /// Number of document wordpieces in the window. Generation-time
    /// bookkeeping only: not serialized, and zero on instances read back
    /// from a file (downstream stages derive everything from `wp_to_doc`).
    #[serde(skip)]
    pub content_len: usize,
}

impl TrainingInstance {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    /// Null instances point their span at the `[CLS]` position.
    pub fn is_null(&self) -> bool {
        self.answer_type == AnswerType::NoAnswer
    }
}

/// Lay out the windows for a document of `doc_wp_len` wordpieces and a
/// (already truncated) question of `question_wp_len` wordpieces.
///
/// Windows start at stride multiples; generation stops after the first
/// window that reaches the final document wordpiece, so no window is a
/// strict suffix of an earlier one. An empty document yields no windows.
pub fn generate_windows(doc_wp_len: usize, question_wp_len: usize, config: &GenConfig) -> Vec<Window> {
    let overhead = question_wp_len + 3;
    assert!(
        config.max_seq_len > overhead && config.max_seq_len - overhead >= config.stride,
        "window capacity below stride; GenConfig::validate rejects such configs"
    );
    let capacity = config.max_seq_len - overhead;

    let mut windows = Vec::new();
    let mut start = 0;
    while start < doc_wp_len {
        let len = capacity.min(doc_wp_len - start);
        windows.push(Window { start, len });
        if start + capacity >= doc_wp_len {
            break;
        }
        start += config.stride;
    }
    windows
}

/// An annotation re-expressed in doc-wordpiece coordinates.
///
/// `short_count` keeps the original number of annotated short spans;
/// `shorts` holds only those that map onto at least one wordpiece. A span
/// covering nothing but dropped HTML has no wordpiece extent and can never
/// be contained in a window.
#[derive(Debug, Clone, Default)]
pub struct WpAnnotation {
    pub long: Option<WpSpan>,
    pub shorts: Vec<WpSpan>,
    pub short_count: usize,
    pub yes_no: YesNo,
}

/// Inclusive wordpiece extent of a doc-token span: the first and last
/// wordpiece whose source token lies in `[start_token, end_token)`. `None`
/// when no wordpiece maps into the span.
pub fn to_wp_span(wp_to_doc: &[i64], span: &TokenSpan) -> Option<WpSpan> {
    let lo = span.start_token as i64;
    let hi = span.end_token as i64;
    let mut first = None;
    let mut last = None;
    for (i, &j) in wp_to_doc.iter().enumerate() {
        if j >= lo && j < hi {
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    Some(WpSpan {
        first: first?,
        last: last?,
    })
}

/// Convert a corpus annotation into wordpiece coordinates against a
/// tokenized document.
pub fn convert_annotation(doc: &TokenizedDoc, ann: &Annotation) -> WpAnnotation {
    WpAnnotation {
        long: ann
            .long_span
            .as_ref()
            .and_then(|s| to_wp_span(&doc.wp_to_doc, s)),
        shorts: ann
            .short_spans
            .iter()
            .filter_map(|s| to_wp_span(&doc.wp_to_doc, s))
            .collect(),
        short_count: ann.short_spans.len(),
        yes_no: ann.yes_no,
    }
}

/// Label one window.
///
/// Branches, in order:
/// 1. the annotation has short spans and every one lies fully inside the
///    window → the smallest covering span, type SHORT;
/// 2. a yes/no verdict with the long span fully inside → the long extent,
///    type YES or NO;
/// 3. a long-only annotation (no shorts, no verdict) with the long span
///    fully inside → the long extent, type LONG;
/// 4. anything else → `(0, 0, NO_ANSWER)`, the `[CLS]` position.
///
/// `content_offset` is the instance index of the window's first wordpiece,
/// i.e. `1 + question_len + 1`.
pub fn assign_targets(
    window: &Window,
    ann: &WpAnnotation,
    content_offset: usize,
) -> (usize, usize, AnswerType) {
    let position = |wp: usize| content_offset + (wp - window.start);

    if ann.short_count > 0 {
        if ann.shorts.len() == ann.short_count && ann.shorts.iter().all(|s| window.contains(s)) {
            let first = ann.shorts.iter().map(|s| s.first).min().expect("non-empty");
            let last = ann.shorts.iter().map(|s| s.last).max().expect("non-empty");
            return (position(first), position(last), AnswerType::Short);
        }
        return (0, 0, AnswerType::NoAnswer);
    }

    if ann.yes_no != YesNo::None {
        if let Some(long) = &ann.long {
            if window.contains(long) {
                let t = if ann.yes_no == YesNo::Yes {
                    AnswerType::Yes
                } else {
                    AnswerType::No
                };
                return (position(long.first), position(long.last), t);
            }
        }
        return (0, 0, AnswerType::NoAnswer);
    }

    if let Some(long) = &ann.long {
        if window.contains(long) {
            return (position(long.first), position(long.last), AnswerType::Long);
        }
    }
    (0, 0, AnswerType::NoAnswer)
}

/// Deterministic null downsampling: non-null instances always survive; a
/// null instance survives iff
/// `splitmix64(seed ⊕ example_id ⊕ window_start) % rate == 0`. Order is
/// preserved, and the decision depends only on the instance's identity, not
/// on its position in the stream or the thread schedule.
pub fn downsample(instances: Vec<TrainingInstance>, config: &GenConfig) -> Vec<TrainingInstance> {
    instances
        .into_iter()
        .filter(|inst| keep_instance(inst.example_id, inst.window_start, inst.is_null(), config))
        .collect()
}

fn keep_instance(example_id: i64, window_start: usize, is_null: bool, config: &GenConfig) -> bool {
    if !is_null {
        return true;
    }
    let key = config.seed ^ (example_id as u64) ^ (window_start as u64);
    splitmix64(key).is_multiple_of(config.downsample_rate)
}

fn build_instance(
    example_id: i64,
    question_wp: &[u32],
    window: &Window,
    doc: &TokenizedDoc,
    vocab: &Vocab,
    target: (usize, usize, AnswerType),
) -> TrainingInstance {
    let content_offset = 1 + question_wp.len() + 1;
    let mut input_ids = Vec::with_capacity(content_offset + window.len + 1);
    let mut wp_to_doc = Vec::with_capacity(content_offset + window.len + 1);

    input_ids.push(vocab.cls_id);
    input_ids.extend_from_slice(question_wp);
    input_ids.push(vocab.sep_id);
    wp_to_doc.resize(content_offset, -1);

    let range = window.start..window.start + window.len;
    input_ids.extend_from_slice(&doc.wp_ids[range.clone()]);
    wp_to_doc.extend_from_slice(&doc.wp_to_doc[range]);

    input_ids.push(vocab.sep_id);
    wp_to_doc.push(-1);

    TrainingInstance {
        example_id,
        window_start: window.start,
        input_ids,
        wp_to_doc,
        target_start: target.0,
        target_end: target.1,
        answer_type: target.2,
        content_len: window.len,
    }
}

/// Generate all instances for one example; train mode labels against the
/// example's first annotation and applies null downsampling, infer mode
/// emits every window with placeholder targets.
pub fn preprocess_example(
    example: &Example,
    vocab: &Vocab,
    config: &GenConfig,
    mode: Mode,
) -> Vec<TrainingInstance> {
    let doc = tokenize_document(example, vocab, &config.tokenizer);
    let mut question_wp = tokenize_question(&example.question_text, vocab);
    question_wp.truncate(config.max_question_wp);
    let content_offset = 1 + question_wp.len() + 1;

    let windows = generate_windows(doc.len(), question_wp.len(), config);

    let ann = match mode {
        Mode::Train => example
            .annotations
            .first()
            .map(|a| convert_annotation(&doc, a))
            .unwrap_or_default(),
        Mode::Infer => WpAnnotation::default(),
    };

    let mut instances: Vec<TrainingInstance> = windows
        .iter()
        .map(|w| {
            let target = match mode {
                Mode::Train => assign_targets(w, &ann, content_offset),
                Mode::Infer => (0, 0, AnswerType::NoAnswer),
            };
            build_instance(example.example_id, &question_wp, w, &doc, vocab, target)
        })
        .collect();

    if mode == Mode::Train {
        instances = downsample(instances, config);
    }
    instances
}

/// Preprocess a whole corpus in input order.
pub fn preprocess_corpus(
    examples: &[Example],
    vocab: &Vocab,
    config: &GenConfig,
    mode: Mode,
) -> Result<Vec<TrainingInstance>> {
    config.validate()?;
    use rayon::prelude::*;
    Ok(examples
        .par_iter()
        .map(|ex| preprocess_example(ex, vocab, config, mode))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect())
}

/// Read an instance file produced by preprocessing.
pub fn read_instances(path: &std::path::Path) -> Result<Vec<TrainingInstance>> {
    let records = crate::jsonl::read_file::<TrainingInstance>(path)?;
    let mut out = Vec::new();
    for item in records {
        out.push(item?.1);
    }
    Ok(out)
}
