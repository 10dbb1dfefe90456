//! Wordpiece tokenization with structural markup tokens.
//!
//! Documents arrive as whitespace tokens, some of which are HTML tags. The
//! tokenizer lowercases and strips accents, splits content words into
//! wordpieces by greedy longest-match against a fixed vocabulary, and folds
//! HTML structure down to atomic placeholder tokens: the N-th paragraph,
//! table, or list opener becomes a single `[Paragraph=N]`-style id. Every
//! emitted wordpiece carries the index of the document token it came from
//! (or −1 for inserted markup), which is what later stages use to map model
//! positions back to document spans.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Example;
use crate::error::{Error, Result};

/// Special tokens every vocabulary must define.
pub const REQUIRED_SPECIALS: [&str; 4] = ["[CLS]", "[SEP]", "[PAD]", "[UNK]"];

/// Prefix marking a continuation wordpiece in the vocabulary.
pub const CONTINUATION: &str = "##";

/// An immutable wordpiece vocabulary: id = 0-based position in the source
/// file. Shareable across threads once loaded.
#[derive(Debug, Clone)]
pub struct Vocab {
    entries: Vec<String>,
    id_of: HashMap<String, u32>,
    /// Ids of every bracketed `[...]` entry, markup families included.
    markup_ids: HashMap<String, u32>,
    pub cls_id: u32,
    pub sep_id: u32,
    pub pad_id: u32,
    pub unk_id: u32,
}

impl Vocab {
    /// Build a vocabulary from an ordered entry list, checking that the
    /// required specials are present and that no token repeats.
    pub fn from_entries(entries: Vec<String>) -> Result<Vocab> {
        let mut id_of = HashMap::with_capacity(entries.len());
        let mut markup_ids = HashMap::new();
        for (id, token) in entries.iter().enumerate() {
            if token.is_empty() {
                return Err(Error::Config(format!("empty vocab entry at line {id}")));
            }
            let id = id as u32;
            if id_of.insert(token.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate vocab entry {token:?}")));
            }
            if token.starts_with('[') && token.ends_with(']') {
                markup_ids.insert(token.clone(), id);
            }
        }
        let need = |name: &str| {
            id_of
                .get(name)
                .copied()
                .ok_or_else(|| Error::Config(format!("vocab is missing required token {name}")))
        };
        Ok(Vocab {
            cls_id: need("[CLS]")?,
            sep_id: need("[SEP]")?,
            pad_id: need("[PAD]")?,
            unk_id: need("[UNK]")?,
            entries,
            id_of,
            markup_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    /// Token string for an id; panics on out-of-range ids, which cannot come
    /// from this vocabulary.
    pub fn token(&self, id: u32) -> &str {
        &self.entries[id as usize]
    }

    pub fn markup_ids(&self) -> &HashMap<String, u32> {
        &self.markup_ids
    }
}

/// Load a newline-delimited vocabulary file: one token per line, id = line
/// number.
pub fn load_vocab(path: &Path) -> Result<Vocab> {
    let text = std::fs::read_to_string(path)?;
    let entries: Vec<String> = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    Vocab::from_entries(entries)
}

/// The three HTML structure families that receive markup tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Paragraph,
    Table,
    List,
}

impl StructureKind {
    fn family(&self) -> &'static str {
        match self {
            StructureKind::Paragraph => "Paragraph",
            StructureKind::Table => "Table",
            StructureKind::List => "List",
        }
    }

    /// Vocabulary entry for the N-th structure, or the un-numbered form.
    pub fn token_name(&self, n: Option<u32>) -> String {
        match n {
            Some(n) => format!("[{}={}]", self.family(), n),
            None => format!("[{}]", self.family()),
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family())
    }
}

/// Classify an HTML token as a structure opener, if it is one.
///
/// Openers are the bare tags `<P>`, `<Table>`, `<Ul>`, `<Ol>`, `<Dl>`,
/// case-insensitive. Anything else — closers, other tags, tags with
/// attributes — is not structural.
pub fn structure_opener(text: &str) -> Option<StructureKind> {
    let inner = text.strip_prefix('<')?.strip_suffix('>')?;
    if inner.eq_ignore_ascii_case("p") {
        Some(StructureKind::Paragraph)
    } else if inner.eq_ignore_ascii_case("table") {
        Some(StructureKind::Table)
    } else if inner.eq_ignore_ascii_case("ul")
        || inner.eq_ignore_ascii_case("ol")
        || inner.eq_ignore_ascii_case("dl")
    {
        Some(StructureKind::List)
    } else {
        None
    }
}

/// Tokenizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    /// Highest structure ordinal that still gets a numbered markup token;
    /// beyond it the un-numbered family token is used instead.
    pub max_markup_index: u32,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            max_markup_index: 50,
        }
    }
}

/// How many markup tokens of each kind a document produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MarkupCounts {
    pub paragraphs: u32,
    pub tables: u32,
    pub lists: u32,
}

/// A fully tokenized document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedDoc {
    /// Wordpiece ids in document order.
    pub wp_ids: Vec<u32>,
    /// For each wordpiece, the index of its source document token, or −1
    /// for inserted markup tokens. Non-negative entries are non-decreasing.
    pub wp_to_doc: Vec<i64>,
    pub markup_counts: MarkupCounts,
}

impl TokenizedDoc {
    pub fn len(&self) -> usize {
        self.wp_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wp_ids.is_empty()
    }
}

/// Lowercase and strip accents: NFD decomposition with combining marks
/// removed, then per-char lowercasing.
pub fn normalize(text: &str) -> String {
    text.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Split one content token into wordpiece ids by greedy longest-match-first.
///
/// The first piece matches the (normalized) text verbatim; continuation
/// pieces match with the `##` prefix. If at any point no vocabulary entry
/// matches, the whole token collapses to a single `[UNK]`.
pub fn wordpiece(token_text: &str, vocab: &Vocab) -> Vec<u32> {
    let text = normalize(token_text);
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return vec![vocab.unk_id];
    }

    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut matched = None;
        while start < end {
            let mut candidate = String::new();
            if start > 0 {
                candidate.push_str(CONTINUATION);
            }
            candidate.extend(&chars[start..end]);
            if let Some(id) = vocab.lookup(&candidate) {
                matched = Some(id);
                break;
            }
            end -= 1;
        }
        match matched {
            Some(id) => {
                pieces.push(id);
                start = end;
            }
            None => return vec![vocab.unk_id],
        }
    }
    pieces
}

/// Tokenize free question text: whitespace-split then wordpiece each word.
/// Questions carry no HTML, so no markup handling applies.
pub fn tokenize_question(text: &str, vocab: &Vocab) -> Vec<u32> {
    text.split_whitespace()
        .flat_map(|word| wordpiece(word, vocab))
        .collect()
}

/// Id for the N-th structure of a kind, falling back from the numbered form
/// to the un-numbered family token, and finally to `[UNK]`, so markup always
/// occupies exactly one position.
fn markup_id(kind: StructureKind, n: u32, vocab: &Vocab, config: &TokenizerConfig) -> u32 {
    let numbered = if n <= config.max_markup_index {
        vocab.lookup(&kind.token_name(Some(n)))
    } else {
        None
    };
    numbered
        .or_else(|| vocab.lookup(&kind.token_name(None)))
        .unwrap_or(vocab.unk_id)
}

/// Tokenize a whole document: markup tokens for structure openers, dropped
/// other HTML, wordpieces with document-token alignment for everything else.
pub fn tokenize_document(example: &Example, vocab: &Vocab, config: &TokenizerConfig) -> TokenizedDoc {
    let mut doc = TokenizedDoc::default();
    for tok in &example.doc_tokens {
        if tok.is_html {
            let Some(kind) = structure_opener(&tok.text) else {
                continue;
            };
            let n = match kind {
                StructureKind::Paragraph => {
                    doc.markup_counts.paragraphs += 1;
                    doc.markup_counts.paragraphs
                }
                StructureKind::Table => {
                    doc.markup_counts.tables += 1;
                    doc.markup_counts.tables
                }
                StructureKind::List => {
                    doc.markup_counts.lists += 1;
                    doc.markup_counts.lists
                }
            };
            doc.wp_ids.push(markup_id(kind, n, vocab, config));
            doc.wp_to_doc.push(-1);
        } else {
            for id in wordpiece(&tok.text, vocab) {
                doc.wp_ids.push(id);
                doc.wp_to_doc.push(tok.index as i64);
            }
        }
    }
    doc
}
