//! Seeded synthetic data for tests and benchmarks.
//!
//! Everything here is deterministic: the same seed produces byte-identical
//! vocabularies, corpora, instances, and logits on every platform, so
//! fixtures never need to be checked in. Documents mix plain words,
//! multi-piece words, unknown words, and HTML structure so that generated
//! corpora exercise every tokenizer and windowing path.

use crate::corpus::{
    is_html_token, Annotation, DocToken, Example, LongAnswerCandidate, TokenSpan, YesNo,
};
use crate::hash::{splitmix64, SplitMix64};
use crate::instance::{AnswerType, TrainingInstance};
use crate::scorer::LogitsRecord;

/// Words every synthetic document and question draws from; all of them are
/// vocabulary entries.
const WORD_POOL: &[&str] = &[
    "the", "of", "a", "in", "is", "was", "and", "to", "for", "with", "on", "as", "by", "at",
    "what", "who", "when", "where", "which", "how", "many", "year", "first", "city", "river",
    "king", "war", "team", "season", "album", "film", "president", "state", "north", "south",
    "world", "people", "found", "named", "built", "known", "large", "small", "long", "new",
    "old", "play", "record", "model", "train", "answer", "question", "second", "third",
];

/// Suffixes whose continuation pieces are in the vocabulary, used to build
/// two-piece words such as `models` → `model ##s`.
const SUFFIXES: &[&str] = &["s", "ing", "ed", "ly"];

/// A fixed vocabulary that covers the word pool, letter-by-letter
/// fallbacks, suffix continuations, and numbered markup tokens.
pub fn synthetic_vocab() -> Vec<String> {
    let mut entries: Vec<String> = vec!["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
        .into_iter()
        .map(String::from)
        .collect();
    for kind in ["Paragraph", "Table", "List"] {
        entries.push(format!("[{kind}]"));
        for n in 1..=50 {
            entries.push(format!("[{kind}={n}]"));
        }
    }
    for c in 'a'..='z' {
        entries.push(c.to_string());
        entries.push(format!("##{c}"));
    }
    for d in '0'..='9' {
        entries.push(d.to_string());
    }
    entries.extend(WORD_POOL.iter().map(|w| w.to_string()));
    entries.extend(SUFFIXES.iter().map(|s| format!("##{s}")));
    // Single-letter pool words collide with the letter fallbacks.
    let mut seen = std::collections::HashSet::new();
    entries.retain(|e| seen.insert(e.clone()));
    entries
}

fn pool_word(rng: &mut SplitMix64) -> String {
    WORD_POOL[rng.next_below(WORD_POOL.len())].to_string()
}

/// A document word: usually a pool word, sometimes a two-piece composite,
/// occasionally a word no vocabulary entry can start (→ `[UNK]`).
fn document_word(rng: &mut SplitMix64) -> String {
    match rng.next_below(10) {
        0 => format!(
            "{}{}",
            pool_word(rng),
            SUFFIXES[rng.next_below(SUFFIXES.len())]
        ),
        1 => "ξ".repeat(1 + rng.next_below(3)),
        _ => pool_word(rng),
    }
}

/// One synthetic example: an HTML-structured document of a few paragraphs,
/// per-paragraph long-answer candidates, and a single annotation cycling
/// through all five answer types.
fn synthetic_example(example_id: i64, rng: &mut SplitMix64) -> Example {
    let mut words: Vec<String> = Vec::new();
    // (candidate span, first word index, last word index + 1) per paragraph.
    let mut paragraphs: Vec<(TokenSpan, usize, usize)> = Vec::new();
    let paragraph_count = 2 + rng.next_below(5);
    for _ in 0..paragraph_count {
        let (opener, closer) = match rng.next_below(6) {
            0 => ("<Table>", "</Table>"),
            1 => ("<Ul>", "</Ul>"),
            _ => ("<P>", "</P>"),
        };
        let start = words.len();
        words.push(opener.to_string());
        let body = 6 + rng.next_below(30);
        for _ in 0..body {
            words.push(document_word(rng));
        }
        words.push(closer.to_string());
        paragraphs.push((TokenSpan::new(start, words.len()), start + 1, words.len() - 1));
    }

    let mut candidates: Vec<LongAnswerCandidate> = paragraphs
        .iter()
        .map(|(span, _, _)| LongAnswerCandidate {
            span: *span,
            top_level: true,
        })
        .collect();
    // A nested (non-top-level) candidate inside some paragraph.
    if rng.next_below(2) == 0 {
        let (_, lo, hi) = paragraphs[rng.next_below(paragraphs.len())];
        if hi - lo >= 4 {
            let s = lo + rng.next_below(hi - lo - 2);
            let e = (s + 2 + rng.next_below(4)).min(hi);
            candidates.push(LongAnswerCandidate {
                span: TokenSpan::new(s, e),
                top_level: false,
            });
        }
    }

    let (span, lo, hi) = paragraphs[rng.next_below(paragraphs.len())];
    let annotation = match rng.next_below(5) {
        0 => {
            // Short answer(s) inside the paragraph.
            let span_count = 1 + rng.next_below(2);
            let mut shorts = Vec::new();
            for _ in 0..span_count {
                let s = lo + rng.next_below(hi - lo);
                let e = (s + 1 + rng.next_below(3)).min(hi);
                shorts.push(TokenSpan::new(s, e));
            }
            shorts.sort();
            shorts.dedup();
            Annotation {
                long_span: Some(span),
                short_spans: shorts,
                yes_no: YesNo::None,
            }
        }
        1 => Annotation {
            long_span: Some(span),
            short_spans: vec![],
            yes_no: YesNo::None,
        },
        2 => Annotation {
            long_span: Some(span),
            short_spans: vec![],
            yes_no: YesNo::Yes,
        },
        3 => Annotation {
            long_span: Some(span),
            short_spans: vec![],
            yes_no: YesNo::No,
        },
        _ => Annotation {
            long_span: None,
            short_spans: vec![],
            yes_no: YesNo::None,
        },
    };

    let question_len = 3 + rng.next_below(8);
    let mut question = String::new();
    for i in 0..question_len {
        if i > 0 {
            question.push(' ');
        }
        question.push_str(&pool_word(rng));
    }

    let doc_tokens = words
        .into_iter()
        .enumerate()
        .map(|(index, text)| DocToken {
            is_html: is_html_token(&text),
            text,
            index,
        })
        .collect();
    Example {
        example_id,
        question_text: question,
        doc_tokens,
        candidates,
        annotations: vec![annotation],
    }
}

/// Generate `count` synthetic examples. Each example has its own random
/// stream, so any prefix of the corpus is stable under a larger `count`.
pub fn synthetic_corpus(count: usize, seed: u64) -> Vec<Example> {
    (0..count)
        .map(|i| {
            let mut rng = SplitMix64::new(splitmix64(seed ^ i as u64));
            synthetic_example(1_000_000 + i as i64, &mut rng)
        })
        .collect()
}

/// Filler ids start here; lower ids are reserved for the planted markers.
const FILLER_BASE: usize = 10;

/// Training instances a small model can memorize: the target span is
/// marked by planted tokens (id 2 at the start, id 3 at the end) and the
/// answer type by a planted token at the final position, so every label is
/// readable from the input.
pub fn trainable_instances(
    count: usize,
    seq_len: usize,
    vocab_size: u32,
    seed: u64,
) -> Vec<TrainingInstance> {
    assert!(seq_len >= 8 && vocab_size as usize > FILLER_BASE);
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|i| {
            let mut input_ids: Vec<u32> = (0..seq_len)
                .map(|_| (FILLER_BASE + rng.next_below(vocab_size as usize - FILLER_BASE)) as u32)
                .collect();
            input_ids[0] = 1;
            let answer_type = AnswerType::from_index(rng.next_below(5) as u8).unwrap();
            let (target_start, target_end) = if answer_type == AnswerType::NoAnswer {
                (0, 0)
            } else {
                let s = 1 + rng.next_below(seq_len - 3);
                let e = (s + 1 + rng.next_below(6)).min(seq_len - 2);
                input_ids[s] = 2;
                input_ids[e] = 3;
                (s, e)
            };
            input_ids[seq_len - 1] = 4 + answer_type.index() as u32;
            let wp_to_doc: Vec<i64> = (0..seq_len).map(|p| p as i64 - 1).collect();
            TrainingInstance {
                example_id: i as i64,
                window_start: 0,
                input_ids,
                wp_to_doc,
                target_start,
                target_end,
                answer_type,
                content_len: seq_len - 1,
            }
        })
        .collect()
}

/// Null instances (target `[CLS]`, type no-answer) with varied example ids
/// and window offsets, for downsampling statistics.
pub fn null_instances(count: usize, seed: u64) -> Vec<TrainingInstance> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|i| {
            let seq_len = 8 + rng.next_below(8);
            let input_ids = (0..seq_len)
                .map(|_| (FILLER_BASE + rng.next_below(90)) as u32)
                .collect();
            let wp_to_doc = (0..seq_len).map(|p| p as i64 - 1).collect();
            TrainingInstance {
                example_id: i as i64,
                window_start: (i % 4) * 128,
                input_ids,
                wp_to_doc,
                target_start: 0,
                target_end: 0,
                answer_type: AnswerType::NoAnswer,
                content_len: seq_len - 1,
            }
        })
        .collect()
}

/// A document's wordpiece→token map: words expand to 1–3 pieces sharing an
/// index, markup pieces map to −1, and indices advance monotonically.
fn synthetic_wp_map(doc_wp_len: usize, rng: &mut SplitMix64) -> Vec<i64> {
    let mut map = Vec::with_capacity(doc_wp_len);
    let mut doc_idx: i64 = 0;
    while map.len() < doc_wp_len {
        if rng.next_below(8) == 0 {
            map.push(-1);
        } else {
            let pieces = (1 + rng.next_below(3)).min(doc_wp_len - map.len());
            for _ in 0..pieces {
                map.push(doc_idx);
            }
        }
        doc_idx += 1;
    }
    map
}

/// Instances plus random logits for one document, windowed like the real
/// pipeline: `[CLS]`, a question of `question_len` pieces, `[SEP]`, a
/// window of the document map, `[SEP]`. Logit values are uniform in
/// [−4, 4).
fn scored_document(
    example_id: i64,
    doc_wp_len: usize,
    question_len: usize,
    capacity: usize,
    stride: usize,
    rng: &mut SplitMix64,
) -> Vec<(TrainingInstance, LogitsRecord)> {
    let doc_map = synthetic_wp_map(doc_wp_len, rng);
    let mut out = Vec::new();
    let mut start = 0usize;
    loop {
        let len = capacity.min(doc_wp_len - start);
        let mut wp_to_doc = vec![-1i64; question_len + 2];
        wp_to_doc.extend_from_slice(&doc_map[start..start + len]);
        wp_to_doc.push(-1);
        let total = wp_to_doc.len();
        let input_ids: Vec<u32> = (0..total).map(|_| rng.next_below(100) as u32).collect();
        let instance = TrainingInstance {
            example_id,
            window_start: start,
            input_ids,
            wp_to_doc,
            target_start: 0,
            target_end: 0,
            answer_type: AnswerType::NoAnswer,
            content_len: len,
        };
        let logits = LogitsRecord {
            example_id,
            window_start: start,
            start_logits: (0..total).map(|_| rng.next_f64() * 8.0 - 4.0).collect(),
            end_logits: (0..total).map(|_| rng.next_f64() * 8.0 - 4.0).collect(),
            type_logits: (0..5).map(|_| rng.next_f64() * 8.0 - 4.0).collect(),
        };
        out.push((instance, logits));
        if start + len >= doc_wp_len {
            break;
        }
        start += stride;
    }
    out
}

/// Randomized multi-window documents with random logits, for decoder
/// stress tests. Documents are at most 128 wordpieces long and windows are
/// small enough that most documents get several.
pub fn scored_documents(doc_count: usize, seed: u64) -> Vec<Vec<(TrainingInstance, LogitsRecord)>> {
    (0..doc_count)
        .map(|i| {
            let mut rng = SplitMix64::new(splitmix64(seed ^ i as u64));
            let doc_wp_len = 16 + rng.next_below(113);
            let question_len = 3 + rng.next_below(8);
            scored_document(i as i64, doc_wp_len, question_len, 48, 16, &mut rng)
        })
        .collect()
}
