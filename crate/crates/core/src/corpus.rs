//! Corpus data model, record parsing, and invariant validation.
//!
//! The input is the "simplified" question-answering corpus shape: one JSON
//! record per line, the document given as a single space-joined token string,
//! token indices into that split. Records stream one at a time; nothing here
//! holds more than the current example.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// A half-open token interval `[start_token, end_token)` in document-token
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start_token: usize,
    pub end_token: usize,
}

impl TokenSpan {
    pub fn new(start_token: usize, end_token: usize) -> Self {
        TokenSpan {
            start_token,
            end_token,
        }
    }

    /// Whether `other` lies fully inside `self`.
    pub fn contains(&self, other: &TokenSpan) -> bool {
        self.start_token <= other.start_token && other.end_token <= self.end_token
    }

    pub fn len(&self) -> usize {
        self.end_token.saturating_sub(self.start_token)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for TokenSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start_token, self.end_token)
    }
}

/// One whitespace-delimited document token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocToken {
    /// Raw token text as it appeared in `document_text`.
    pub text: String,
    /// True iff the text begins with '<' and ends with '>'.
    pub is_html: bool,
    /// Position within the document, 0-based and gap-free.
    pub index: usize,
}

/// Syntactic HTML-ness test used for [`DocToken::is_html`].
///
/// Tokens come from single-space splitting, so they never contain interior
/// whitespace; the test is purely on the delimiters.
pub fn is_html_token(text: &str) -> bool {
    text.starts_with('<') && text.ends_with('>') && text.len() >= 2
}

/// A candidate passage that a long answer may point at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LongAnswerCandidate {
    /// Inclusive start, exclusive end, in document-token coordinates.
    pub span: TokenSpan,
    /// Top-level candidates are not nested inside any other candidate.
    pub top_level: bool,
}

/// Yes/no verdict attached to an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YesNo {
    #[default]
    None,
    Yes,
    No,
}

impl YesNo {
    pub fn as_str(&self) -> &'static str {
        match self {
            YesNo::None => "NONE",
            YesNo::Yes => "YES",
            YesNo::No => "NO",
        }
    }

    fn from_str(s: &str) -> Option<YesNo> {
        match s {
            "NONE" => Some(YesNo::None),
            "YES" => Some(YesNo::Yes),
            "NO" => Some(YesNo::No),
            _ => None,
        }
    }
}

/// One annotator's answer for an example. Both parts may be empty, meaning
/// the page holds no answer at all.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Annotation {
    /// The annotated passage, when any.
    pub long_span: Option<TokenSpan>,
    /// Short answer spans inside the long span, possibly empty.
    pub short_spans: Vec<TokenSpan>,
    /// Yes/no verdict; exclusive with `short_spans`.
    pub yes_no: YesNo,
}

impl Annotation {
    /// True when neither a long span, short spans, nor a yes/no verdict is
    /// present.
    pub fn is_null(&self) -> bool {
        self.long_span.is_none() && self.short_spans.is_empty() && self.yes_no == YesNo::None
    }
}

/// One corpus record: a question paired with a tokenized document, the
/// document's long-answer candidates, and one or more annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub example_id: i64,
    pub question_text: String,
    pub doc_tokens: Vec<DocToken>,
    pub candidates: Vec<LongAnswerCandidate>,
    /// One annotation for training data, up to five for evaluation data.
    pub annotations: Vec<Annotation>,
}

impl Example {
    pub fn document_len(&self) -> usize {
        self.doc_tokens.len()
    }

    /// The document as its canonical space-joined string.
    pub fn document_text(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.doc_tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&tok.text);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Wire schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RawSpan {
    start_token: i64,
    end_token: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCandidate {
    start_token: i64,
    end_token: i64,
    top_level: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawAnnotation {
    long_answer: RawSpan,
    short_answers: Vec<RawSpan>,
    yes_no_answer: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawExample {
    example_id: i64,
    question_text: String,
    document_text: String,
    long_answer_candidates: Vec<RawCandidate>,
    annotations: Vec<RawAnnotation>,
}

fn span_from_raw(raw: &RawSpan, doc_len: usize, example_id: i64, field: &str) -> Result<TokenSpan> {
    let (s, e) = (raw.start_token, raw.end_token);
    if s < 0 || e < 0 {
        return Err(Error::Validation {
            example_id,
            message: format!("{field}: negative token index ({s}, {e})"),
        });
    }
    let (s, e) = (s as usize, e as usize);
    if s >= e || e > doc_len {
        return Err(Error::Validation {
            example_id,
            message: format!(
                "{field}: span [{s}, {e}) outside document of {doc_len} tokens"
            ),
        });
    }
    Ok(TokenSpan::new(s, e))
}

/// Parse one corpus line into a validated [`Example`].
///
/// Structural problems (bad JSON, wrong field types, unknown yes/no values)
/// surface as parse errors naming the offending field; spans that fall
/// outside the document and empty documents surface as validation errors
/// carrying the example id.
pub fn parse_example(line: &str) -> Result<Example> {
    let mut de = serde_json::Deserializer::from_str(line);
    let raw: RawExample = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Parse {
        line: None,
        message: format!("field {}: {}", e.path(), e.inner()),
    })?;
    example_from_raw(raw)
}

fn example_from_raw(raw: RawExample) -> Result<Example> {
    let example_id = raw.example_id;
    if raw.document_text.is_empty() {
        return Err(Error::Validation {
            example_id,
            message: "empty document".to_string(),
        });
    }

    let doc_tokens: Vec<DocToken> = raw
        .document_text
        .split(' ')
        .enumerate()
        .map(|(index, text)| DocToken {
            is_html: is_html_token(text),
            text: text.to_string(),
            index,
        })
        .collect();
    let doc_len = doc_tokens.len();

    let mut candidates = Vec::with_capacity(raw.long_answer_candidates.len());
    for (i, cand) in raw.long_answer_candidates.iter().enumerate() {
        let span = span_from_raw(
            &RawSpan {
                start_token: cand.start_token,
                end_token: cand.end_token,
            },
            doc_len,
            example_id,
            &format!("long_answer_candidates[{i}]"),
        )?;
        candidates.push(LongAnswerCandidate {
            span,
            top_level: cand.top_level,
        });
    }

    let mut annotations = Vec::with_capacity(raw.annotations.len());
    for (i, ann) in raw.annotations.iter().enumerate() {
        let long_span = if ann.long_answer.start_token == -1 && ann.long_answer.end_token == -1 {
            None
        } else {
            Some(span_from_raw(
                &ann.long_answer,
                doc_len,
                example_id,
                &format!("annotations[{i}].long_answer"),
            )?)
        };
        let mut short_spans = Vec::with_capacity(ann.short_answers.len());
        for (j, sa) in ann.short_answers.iter().enumerate() {
            short_spans.push(span_from_raw(
                sa,
                doc_len,
                example_id,
                &format!("annotations[{i}].short_answers[{j}]"),
            )?);
        }
        let yes_no = YesNo::from_str(&ann.yes_no_answer).ok_or_else(|| Error::Parse {
            line: None,
            message: format!(
                "annotations[{i}].yes_no_answer: unknown value {:?}",
                ann.yes_no_answer
            ),
        })?;
        annotations.push(Annotation {
            long_span,
            short_spans,
            yes_no,
        });
    }

    Ok(Example {
        example_id,
        question_text: raw.question_text,
        doc_tokens,
        candidates,
        annotations,
    })
}

fn raw_from_example(example: &Example) -> RawExample {
    RawExample {
        example_id: example.example_id,
        question_text: example.question_text.clone(),
        document_text: example.document_text(),
        long_answer_candidates: example
            .candidates
            .iter()
            .map(|c| RawCandidate {
                start_token: c.span.start_token as i64,
                end_token: c.span.end_token as i64,
                top_level: c.top_level,
            })
            .collect(),
        annotations: example
            .annotations
            .iter()
            .map(|a| RawAnnotation {
                long_answer: match &a.long_span {
                    Some(s) => RawSpan {
                        start_token: s.start_token as i64,
                        end_token: s.end_token as i64,
                    },
                    None => RawSpan {
                        start_token: -1,
                        end_token: -1,
                    },
                },
                short_answers: a
                    .short_spans
                    .iter()
                    .map(|s| RawSpan {
                        start_token: s.start_token as i64,
                        end_token: s.end_token as i64,
                    })
                    .collect(),
                yes_no_answer: a.yes_no.as_str().to_string(),
            })
            .collect(),
    }
}

/// Serialize an example to its canonical single-line form.
///
/// `parse_example(serialize_example(x)) == x`, and re-serializing yields
/// byte-identical output.
pub fn serialize_example(example: &Example) -> String {
    serde_json::to_string(&raw_from_example(example)).expect("example serialization cannot fail")
}

/// Stream `(line_number, Example)` pairs from a corpus file.
pub fn read_corpus(
    path: &Path,
) -> Result<impl Iterator<Item = Result<(usize, Example)>>> {
    let records = jsonl::read_file::<RawExample>(path)?;
    Ok(records.map(|item| {
        let (lineno, raw) = item?;
        let example = example_from_raw(raw).map_err(|e| at_line(e, lineno))?;
        Ok((lineno, example))
    }))
}

fn at_line(err: Error, lineno: usize) -> Error {
    match err {
        Error::Parse { line: None, message } => Error::Parse {
            line: Some(lineno),
            message,
        },
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Corpus validation
// ---------------------------------------------------------------------------

/// One invariant violation found while validating a corpus. Violations are
/// data, not errors: a validation pass always completes and returns the full
/// list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// The example the violation belongs to.
    pub example_id: i64,
    /// 0-based position of the record in the validated stream.
    pub record: usize,
    /// Path of the offending field.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "example {} (record {}): {}: {}",
            self.example_id, self.record, self.field, self.message
        )
    }
}

/// Check every data-model invariant over a stream of examples.
///
/// Returns the empty list iff the corpus is clean. Checks per-example span
/// bounds, annotation consistency (short spans inside the long span, yes/no
/// exclusive with short spans, short spans implying a long span, long spans
/// matching a candidate) and corpus-level example-id uniqueness.
pub fn validate_corpus<I, B>(examples: I) -> Vec<Violation>
where
    I: IntoIterator<Item = B>,
    B: std::borrow::Borrow<Example>,
{
    let mut violations = Vec::new();
    let mut seen: std::collections::HashMap<i64, usize> = std::collections::HashMap::new();

    for (record, ex) in examples.into_iter().enumerate() {
        let ex = ex.borrow();
        let id = ex.example_id;
        if let Some(&first) = seen.get(&id) {
            violations.push(Violation {
                example_id: id,
                record,
                field: "example_id".to_string(),
                message: format!("duplicate example_id (records {first} and {record})"),
            });
        } else {
            seen.insert(id, record);
        }

        let doc_len = ex.document_len();
        if doc_len == 0 {
            violations.push(Violation {
                example_id: id,
                record,
                field: "document_text".to_string(),
                message: "empty document".to_string(),
            });
        }

        let check_span = |span: &TokenSpan, field: String, out: &mut Vec<Violation>| {
            if span.start_token >= span.end_token || span.end_token > doc_len {
                out.push(Violation {
                    example_id: id,
                    record,
                    field,
                    message: format!("span {span} outside document of {doc_len} tokens"),
                });
            }
        };

        for (i, cand) in ex.candidates.iter().enumerate() {
            check_span(
                &cand.span,
                format!("long_answer_candidates[{i}]"),
                &mut violations,
            );
        }

        for (i, ann) in ex.annotations.iter().enumerate() {
            if let Some(long) = &ann.long_span {
                check_span(
                    long,
                    format!("annotations[{i}].long_answer"),
                    &mut violations,
                );
                if !ex.candidates.iter().any(|c| c.span == *long) {
                    violations.push(Violation {
                        example_id: id,
                        record,
                        field: format!("annotations[{i}].long_answer"),
                        message: format!("long span {long} matches no candidate"),
                    });
                }
            }
            for (j, short) in ann.short_spans.iter().enumerate() {
                check_span(
                    short,
                    format!("annotations[{i}].short_answers[{j}]"),
                    &mut violations,
                );
                match &ann.long_span {
                    Some(long) if !long.contains(short) => violations.push(Violation {
                        example_id: id,
                        record,
                        field: format!("annotations[{i}].short_answers[{j}]"),
                        message: format!("short span {short} outside long span {long}"),
                    }),
                    _ => {}
                }
            }
            if !ann.short_spans.is_empty() && ann.long_span.is_none() {
                violations.push(Violation {
                    example_id: id,
                    record,
                    field: format!("annotations[{i}].short_answers"),
                    message: "short spans present without a long span".to_string(),
                });
            }
            if ann.yes_no != YesNo::None && !ann.short_spans.is_empty() {
                violations.push(Violation {
                    example_id: id,
                    record,
                    field: format!("annotations[{i}].yes_no_answer"),
                    message: "yes/no verdict with non-empty short spans".to_string(),
                });
            }
        }
    }

    violations
}
