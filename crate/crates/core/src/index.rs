//! Immutable inverted index over passages.
//!
//! On disk an index is a directory holding `index.psx`: one header line
//! `PASSEARCH-INDEX <format> <stopwords>` followed by a single JSON document
//! with stored passages, document titles and postings.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{tokenize, STOPWORDS_VERSION};
use crate::corpus::Passage;

pub const INDEX_MAGIC: &str = "PASSEARCH-INDEX";
pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.psx";

/// Dense passage number assigned in ingest order.
pub type PassageRef = u32;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate passage id `{0}`")]
    DuplicatePassageId(String),
    #[error("format version mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub passage_ref: PassageRef,
    pub term_frequency: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostingList {
    pub term: String,
    pub entries: Vec<Posting>,
}

impl PostingList {
    pub fn document_frequency(&self) -> usize {
        self.entries.len()
    }

    pub fn term_frequency(&self, passage_ref: PassageRef) -> u32 {
        self.entries
            .binary_search_by_key(&passage_ref, |p| p.passage_ref)
            .map(|i| self.entries[i].term_frequency)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredPassage {
    pub passage_id: String,
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Index {
    postings: HashMap<String, PostingList>,
    doc_lengths: Vec<u32>,
    stored: Vec<StoredPassage>,
    ref_by_id: HashMap<String, PassageRef>,
    doc_titles: BTreeMap<String, String>,
    total_length: u64,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    passages: Vec<StoredPassage>,
    doc_lengths: Vec<u32>,
    doc_titles: BTreeMap<String, String>,
    postings: Vec<PostingList>,
}

pub fn build_index(passages: &[Passage]) -> Result<Index, IndexError> {
    let mut postings: HashMap<String, PostingList> = HashMap::new();
    let mut doc_lengths = Vec::with_capacity(passages.len());
    let mut stored = Vec::with_capacity(passages.len());
    let mut ref_by_id = HashMap::with_capacity(passages.len());
    let mut doc_titles = BTreeMap::new();
    let mut total_length = 0u64;

    for (i, p) in passages.iter().enumerate() {
        let passage_ref = i as PassageRef;
        if ref_by_id.insert(p.passage_id.clone(), passage_ref).is_some() {
            return Err(IndexError::DuplicatePassageId(p.passage_id.clone()));
        }
        let tokens = tokenize(&p.text);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in &tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in counts {
            postings
                .entry(term.clone())
                .or_insert_with(|| PostingList {
                    term,
                    entries: Vec::new(),
                })
                .entries
                .push(Posting {
                    passage_ref,
                    term_frequency: tf,
                });
        }
        doc_lengths.push(tokens.len() as u32);
        total_length += tokens.len() as u64;
        stored.push(StoredPassage {
            passage_id: p.passage_id.clone(),
            doc_id: p.doc_id.clone(),
            text: p.text.clone(),
        });
        doc_titles
            .entry(p.doc_id.clone())
            .or_insert_with(|| p.doc_title.clone());
    }

    Ok(Index {
        postings,
        doc_lengths,
        stored,
        ref_by_id,
        doc_titles,
        total_length,
    })
}

impl Index {
    pub fn n_passages(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_length(&self) -> f64 {
        if self.doc_lengths.is_empty() {
            0.0
        } else {
            self.total_length as f64 / self.doc_lengths.len() as f64
        }
    }

    pub fn total_length(&self) -> u64 {
        self.total_length
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn postings(&self, term: &str) -> Option<&PostingList> {
        self.postings.get(term)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, PostingList::document_frequency)
    }

    pub fn term_frequency(&self, term: &str, passage_ref: PassageRef) -> u32 {
        self.postings
            .get(term)
            .map_or(0, |pl| pl.term_frequency(passage_ref))
    }

    pub fn doc_length(&self, passage_ref: PassageRef) -> Option<u32> {
        self.doc_lengths.get(passage_ref as usize).copied()
    }

    pub fn passage_ref(&self, passage_id: &str) -> Option<PassageRef> {
        self.ref_by_id.get(passage_id).copied()
    }

    pub fn passage(&self, passage_ref: PassageRef) -> Option<&StoredPassage> {
        self.stored.get(passage_ref as usize)
    }

    pub fn passage_by_id(&self, passage_id: &str) -> Option<&StoredPassage> {
        self.passage_ref(passage_id).and_then(|r| self.passage(r))
    }

    pub fn passages(&self) -> impl Iterator<Item = (PassageRef, &StoredPassage)> {
        self.stored.iter().enumerate().map(|(i, p)| (i as PassageRef, p))
    }

    pub fn doc_title(&self, doc_id: &str) -> Option<&str> {
        self.doc_titles.get(doc_id).map(String::as_str)
    }

    pub fn terms(&self) -> impl Iterator<Item = &PostingList> {
        self.postings.values()
    }

    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir)?;
        let mut postings: Vec<PostingList> = self.postings.values().cloned().collect();
        postings.sort_by(|a, b| a.term.cmp(&b.term));
        let file = IndexFile {
            passages: self.stored.clone(),
            doc_lengths: self.doc_lengths.clone(),
            doc_titles: self.doc_titles.clone(),
            postings,
        };
        let mut out = BufWriter::new(File::create(dir.join(INDEX_FILE))?);
        writeln!(out, "{INDEX_MAGIC} {INDEX_FORMAT_VERSION} {STOPWORDS_VERSION}")?;
        serde_json::to_writer(&mut out, &file).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Index, IndexError> {
        let mut reader = BufReader::new(File::open(dir.join(INDEX_FILE))?);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let expected = format!("{INDEX_MAGIC} {INDEX_FORMAT_VERSION} {STOPWORDS_VERSION}");
        if header.trim_end() != expected {
            return Err(IndexError::FormatVersionMismatch(format!(
                "expected `{expected}`, found `{}`",
                header.trim_end()
            )));
        }
        let file: IndexFile = serde_json::from_reader(reader).map_err(std::io::Error::from)?;
        Self::from_file(file)
    }

    fn from_file(file: IndexFile) -> Result<Index, IndexError> {
        let invalid = |msg: String| IndexError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg));
        let n = file.passages.len();
        if file.doc_lengths.len() != n {
            return Err(invalid("passage and length tables differ in size".into()));
        }
        let mut ref_by_id = HashMap::with_capacity(n);
        for (i, p) in file.passages.iter().enumerate() {
            if ref_by_id.insert(p.passage_id.clone(), i as PassageRef).is_some() {
                return Err(IndexError::DuplicatePassageId(p.passage_id.clone()));
            }
        }
        let mut postings = HashMap::with_capacity(file.postings.len());
        for pl in file.postings {
            let sorted = pl.entries.windows(2).all(|w| w[0].passage_ref < w[1].passage_ref);
            let in_range = pl.entries.iter().all(|e| (e.passage_ref as usize) < n && e.term_frequency > 0);
            if !sorted || !in_range {
                return Err(invalid(format!("bad posting list for `{}`", pl.term)));
            }
            postings.insert(pl.term.clone(), pl);
        }
        let total_length = file.doc_lengths.iter().map(|&l| l as u64).sum();
        Ok(Index {
            postings,
            doc_lengths: file.doc_lengths,
            stored: file.passages,
            ref_by_id,
            doc_titles: file.doc_titles,
            total_length,
        })
    }
}
