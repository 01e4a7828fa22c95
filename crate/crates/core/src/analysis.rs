//! The single text analyzer shared by indexing, querying and highlighting.

/// Version of [`STOPWORDS`]; stored in index headers.
pub const STOPWORDS_VERSION: u32 = 1;

/// Short English stopword list. The article "a" is deliberately absent so
/// single-letter terms stay searchable.
pub const STOPWORDS: &[&str] = &[
    "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is",
    "it", "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there",
    "these", "they", "this", "to", "was", "will", "with",
];

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.contains(&term)
}

/// A token together with its `[start, end)` character offsets in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpan {
    pub term: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercased alphanumeric runs with stopwords removed, keeping offsets.
pub fn token_spans(text: &str) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    let mut flush = |current: &mut String, start: usize, end: usize| {
        if !current.is_empty() {
            if !is_stopword(current) {
                out.push(TokenSpan {
                    term: std::mem::take(current),
                    start,
                    end,
                });
            }
            current.clear();
        }
    };
    for c in text.chars() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = pos;
            }
            current.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
        } else {
            flush(&mut current, start, pos);
        }
        pos += 1;
    }
    flush(&mut current, start, pos);
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).into_iter().map(|t| t.term).collect()
}
