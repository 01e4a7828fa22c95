//! Document records, sentence segmentation and fixed-window passages.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of the abbreviation list below. Bump whenever the list changes,
/// since it changes sentence boundaries and therefore passage ids.
pub const ABBREVIATIONS_VERSION: u32 = 1;

/// Words ending in '.' that never close a sentence. Compared case-insensitively.
pub const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "fig.", "figs.", "eq.", "e.g.", "i.e.", "al.", "vs.",
    "cv.", "spp.", "no.", "pp.",
];

pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("document `{0}` has an empty body")]
    EmptyBody(String),
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("document `{0}` has no sentences")]
    EmptyDocument(String),
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Report,
    Journal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub source_kind: SourceKind,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

/// Raw input record; every field optional so missing ones are reported by name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: Option<String>,
    pub title: Option<String>,
    pub source_kind: Option<SourceKind>,
    pub body: Option<String>,
    pub source_url: Option<String>,
}

/// Character offsets `[start, end)` of one sentence within a document body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    #[serde(default)]
    pub sentence_spans: Vec<SentenceSpan>,
    /// Title of the parent document, carried along so the index can expand
    /// passages with title terms without re-reading the corpus.
    #[serde(default)]
    pub doc_title: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_documents: usize,
    pub n_passages: usize,
    pub n_sentences: usize,
    pub mean_passages_per_doc: f64,
}

pub fn passage_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}-{ordinal}")
}

/// Strip control characters and collapse whitespace runs to single spaces.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            continue;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

pub fn parse_document(record: DocumentRecord) -> Result<Document, CorpusError> {
    let doc_id = record
        .doc_id
        .filter(|id| !id.is_empty())
        .ok_or(CorpusError::MissingField("doc_id"))?;
    if doc_id.chars().any(char::is_whitespace) {
        return Err(CorpusError::Malformed(format!(
            "doc_id `{doc_id}` contains whitespace"
        )));
    }
    let title = record.title.ok_or(CorpusError::MissingField("title"))?;
    let source_kind = record
        .source_kind
        .ok_or(CorpusError::MissingField("source_kind"))?;
    let body = record.body.ok_or(CorpusError::MissingField("body"))?;
    let body = normalize_text(&body);
    if body.is_empty() {
        return Err(CorpusError::EmptyBody(doc_id));
    }
    Ok(Document {
        doc_id,
        title: normalize_text(&title),
        source_kind,
        body,
        source_url: record.source_url.filter(|u| !u.is_empty()),
    })
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201d}' | '\u{2019}' | ')' | ']')
}

fn is_sentence_start(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || matches!(c, '"' | '\'' | '\u{201c}' | '\u{2018}')
}

/// The whitespace-delimited word ending at `end` (exclusive), lowercased,
/// with leading opening punctuation removed.
fn word_before(chars: &[char], end: usize) -> (String, usize) {
    let mut start = end;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let word: String = chars[start..end]
        .iter()
        .skip_while(|c| matches!(c, '(' | '[' | '"' | '\'' | '\u{201c}' | '\u{2018}'))
        .flat_map(|c| c.to_lowercase())
        .collect();
    (word, start)
}

fn is_abbreviation(chars: &[char], terminator: usize) -> bool {
    if chars[terminator] != '.' {
        return false;
    }
    let (word, start) = word_before(chars, terminator + 1);
    if !ABBREVIATIONS.contains(&word.as_str()) {
        return false;
    }
    if word == "al." {
        // only as part of "et al."
        let mut prev_end = start;
        while prev_end > 0 && chars[prev_end - 1].is_whitespace() {
            prev_end -= 1;
        }
        return word_before(chars, prev_end).0 == "et";
    }
    true
}

/// Rule-based sentence segmentation over normalized text.
///
/// A sentence ends after a run of `.`, `?` or `!` (plus any closing quotes or
/// brackets) when the next non-space character starts a sentence (uppercase
/// letter, digit or opening quote) and the word is not a known abbreviation.
/// Text after the last boundary forms a final sentence.
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start = match chars.iter().position(|c| !c.is_whitespace()) {
        Some(s) => s,
        None => return spans,
    };
    let mut i = start;
    while i < n {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let last_terminator = {
            let mut j = i;
            while j + 1 < n && is_terminator(chars[j + 1]) {
                j += 1;
            }
            j
        };
        let mut end = last_terminator + 1;
        while end < n && is_closing(chars[end]) {
            end += 1;
        }
        let mut next = end;
        while next < n && chars[next].is_whitespace() {
            next += 1;
        }
        let boundary = next > end
            && next < n
            && is_sentence_start(chars[next])
            && !is_abbreviation(&chars, last_terminator);
        if boundary {
            spans.push(SentenceSpan { start, end });
            start = next;
            i = next;
        } else {
            i = end.max(i + 1);
        }
    }
    let mut end = n;
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if end > start {
        spans.push(SentenceSpan { start, end });
    }
    spans
}

fn char_slice(chars: &[char], span: SentenceSpan) -> String {
    chars[span.start..span.end].iter().collect()
}

pub fn make_passages(doc: &Document, window: usize) -> Result<Vec<Passage>, CorpusError> {
    if window == 0 {
        return Err(CorpusError::InvalidWindow);
    }
    let spans = split_sentences(&doc.body);
    if spans.is_empty() {
        return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
    }
    let chars: Vec<char> = doc.body.chars().collect();
    Ok(spans
        .chunks(window)
        .enumerate()
        .map(|(i, group)| {
            let ordinal = i + 1;
            let text = group
                .iter()
                .map(|s| char_slice(&chars, *s))
                .collect::<Vec<_>>()
                .join(" ");
            Passage {
                passage_id: passage_id(&doc.doc_id, ordinal),
                doc_id: doc.doc_id.clone(),
                ordinal,
                text,
                sentence_spans: group.to_vec(),
                doc_title: doc.title.clone(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub window: usize,
    /// Abort on the first bad record instead of skipping it.
    pub strict: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            strict: false,
        }
    }
}

#[derive(Debug, Default)]
pub struct IngestOutput {
    pub documents: Vec<Document>,
    pub passages: Vec<Passage>,
    pub stats: CorpusStats,
    /// Per-line errors that were skipped in non-strict mode.
    pub skipped: Vec<CorpusError>,
}

/// Parse one record per line, split each document and aggregate statistics.
pub fn ingest_corpus<R: BufRead>(input: R, opts: IngestOptions) -> Result<IngestOutput, CorpusError> {
    if opts.window == 0 {
        return Err(CorpusError::InvalidWindow);
    }
    let mut out = IngestOutput::default();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let result = serde_json::from_str::<DocumentRecord>(&line)
            .map_err(|e| CorpusError::Malformed(e.to_string()))
            .and_then(parse_document)
            .and_then(|doc| {
                if seen.contains(&doc.doc_id) {
                    return Err(CorpusError::DuplicateDocId(doc.doc_id));
                }
                let passages = make_passages(&doc, opts.window)?;
                Ok((doc, passages))
            });
        match result {
            Ok((doc, passages)) => {
                seen.insert(doc.doc_id.clone());
                out.stats.n_documents += 1;
                out.stats.n_sentences += passages.iter().map(|p| p.sentence_spans.len()).sum::<usize>();
                out.stats.n_passages += passages.len();
                out.passages.extend(passages);
                out.documents.push(doc);
            }
            Err(e) => {
                let e = CorpusError::Line {
                    line: line_no,
                    source: Box::new(e),
                };
                if opts.strict {
                    return Err(e);
                }
                out.skipped.push(e);
            }
        }
    }
    if out.stats.n_documents > 0 {
        out.stats.mean_passages_per_doc =
            out.stats.n_passages as f64 / out.stats.n_documents as f64;
    }
    Ok(out)
}

pub fn read_documents<R: BufRead>(input: R) -> Result<Vec<Document>, CorpusError> {
    Ok(ingest_corpus(input, IngestOptions { window: 1, strict: true })?.documents)
}

pub fn read_passages<R: BufRead>(input: R) -> Result<Vec<Passage>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let passage: Passage = serde_json::from_str(&line).map_err(|e| CorpusError::Line {
            line: idx + 1,
            source: Box::new(CorpusError::Malformed(e.to_string())),
        })?;
        out.push(passage);
    }
    Ok(out)
}

pub fn write_jsonl<W: std::io::Write, T: Serialize>(mut out: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
