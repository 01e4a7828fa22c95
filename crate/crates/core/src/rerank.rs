//! Second-stage reranking over precomputed per-passage term weights.
//!
//! All expensive work happens when the [`TermWeightTable`] is built. At query
//! time a candidate's score is the sum of its table weights for the query
//! tokens, so reranking touches only `|query tokens| x |candidates|` map
//! entries and never re-reads passage text.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::tokenize;
use crate::index::Index;
use crate::retrieval::{idf, search_bm25, Bm25Params, RetrievalError};
use crate::run::RankedList;
use crate::scalar::Score;

pub const BUILTIN_MODEL_TAG: &str = "builtin-lexical";

#[derive(Debug, Error, PartialEq)]
pub enum RerankError {
    #[error("no weights for passage `{0}`")]
    MissingWeights(String),
    #[error("weight file references unknown passage `{0}`")]
    UnknownPassageId(String),
    #[error("malformed weight file at line {line}: {reason}")]
    MalformedWeightFile { line: usize, reason: String },
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RerankError {
    fn from(e: std::io::Error) -> Self {
        RerankError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermWeightTable<S> {
    weights: HashMap<String, HashMap<String, S>>,
    pub model_tag: String,
    /// Seconds since the Unix epoch.
    pub built_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightModel {
    BuiltinLexical,
    ExternalFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankPipelineConfig<S> {
    pub first_stage_depth: usize,
    pub final_k: usize,
    pub weight_model: WeightModel,
    pub bm25: Bm25Params<S>,
}

impl<S: Score> Default for RerankPipelineConfig<S> {
    fn default() -> Self {
        Self {
            first_stage_depth: 1000,
            final_k: 5,
            weight_model: WeightModel::BuiltinLexical,
            bm25: Bm25Params::default(),
        }
    }
}

impl<S: Score> RerankPipelineConfig<S> {
    pub fn validate(&self) -> Result<(), RerankError> {
        if self.final_k == 0 {
            return Err(RerankError::InvalidConfig("final_k must be >= 1"));
        }
        if self.final_k > self.first_stage_depth {
            return Err(RerankError::InvalidConfig("final_k exceeds first_stage_depth"));
        }
        Ok(())
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl<S: Score> TermWeightTable<S> {
    pub fn new(model_tag: impl Into<String>) -> Self {
        Self {
            weights: HashMap::new(),
            model_tag: model_tag.into(),
            built_at: now_secs(),
        }
    }

    pub fn insert(&mut self, passage_id: impl Into<String>, term: impl Into<String>, weight: S) {
        self.weights
            .entry(passage_id.into())
            .or_default()
            .insert(term.into(), weight);
    }

    pub fn set_passage(&mut self, passage_id: impl Into<String>, terms: HashMap<String, S>) {
        self.weights.insert(passage_id.into(), terms);
    }

    pub fn passage(&self, passage_id: &str) -> Option<&HashMap<String, S>> {
        self.weights.get(passage_id)
    }

    pub fn weight(&self, passage_id: &str, term: &str) -> Option<S> {
        self.weights.get(passage_id)?.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn passage_ids(&self) -> impl Iterator<Item = &str> {
        self.weights.keys().map(String::as_str)
    }

    /// Every passage id in the table must exist in `index`.
    pub fn validate_against(&self, index: &Index) -> Result<(), RerankError> {
        let mut ids: Vec<&str> = self.passage_ids().collect();
        ids.sort_unstable();
        match ids.into_iter().find(|id| index.passage_ref(id).is_none()) {
            Some(id) => Err(RerankError::UnknownPassageId(id.to_string())),
            None => Ok(()),
        }
    }

    /// Tab-separated `passage_id term weight` lines preceded by `#` header
    /// lines carrying the model tag and build time. Output is sorted.
    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# model_tag\t{}", self.model_tag)?;
        writeln!(out, "# built_at\t{}", self.built_at)?;
        let sorted: BTreeMap<&String, BTreeMap<&String, &S>> = self
            .weights
            .iter()
            .map(|(p, m)| (p, m.iter().collect()))
            .collect();
        for (pid, terms) in sorted {
            for (term, w) in terms {
                writeln!(out, "{pid}\t{term}\t{w}")?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), RerankError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self, RerankError> {
        let mut table = TermWeightTable {
            weights: HashMap::new(),
            model_tag: "external".to_string(),
            built_at: 0,
        };
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let malformed = |reason: &str| RerankError::MalformedWeightFile {
                line: line_no,
                reason: reason.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix("# ") {
                match header.split_once('\t') {
                    Some(("model_tag", tag)) => table.model_tag = tag.to_string(),
                    Some(("built_at", ts)) => {
                        table.built_at = ts.parse().map_err(|_| malformed("bad built_at"))?
                    }
                    _ => {}
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(malformed("expected passage_id<TAB>term<TAB>weight"));
            }
            let weight: S = cols[2].parse().map_err(|_| malformed("non-numeric weight"))?;
            if !weight.is_finite() {
                return Err(malformed("non-finite weight"));
            }
            table.insert(cols[0], cols[1], weight);
        }
        Ok(table)
    }
}

/// Reads a weight file and checks it against the corpus held by `index`.
pub fn load_weight_table<S: Score>(path: &Path, index: &Index) -> Result<TermWeightTable<S>, RerankError> {
    let table = TermWeightTable::parse(BufReader::new(File::open(path)?))?;
    table.validate_against(index)?;
    Ok(table)
}

/// Built-in lexical weights: `ln(1 + tf) * idf` for each passage term, plus
/// every title token missing from the passage at the passage's smallest
/// positive weight.
pub fn build_weight_table<S: Score>(index: &Index) -> TermWeightTable<S> {
    let mut table = TermWeightTable::new(BUILTIN_MODEL_TAG);
    let n = index.n_passages();
    let mut title_tokens: HashMap<&str, Vec<String>> = HashMap::new();
    for (_, stored) in index.passages() {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in tokenize(&stored.text) {
            *counts.entry(t).or_default() += 1;
        }
        let mut terms: HashMap<String, S> = counts
            .into_iter()
            .map(|(t, tf)| {
                let w = (S::one() + S::from_count(tf)).ln() * idf::<S>(n, index.document_frequency(&t));
                (t, w)
            })
            .collect();
        let floor = terms
            .values()
            .copied()
            .filter(|w| *w > S::zero())
            .fold(None, |m: Option<S>, w| Some(m.map_or(w, |m| m.min(w))));
        if let Some(floor) = floor {
            let title = title_tokens
                .entry(stored.doc_id.as_str())
                .or_insert_with(|| tokenize(index.doc_title(&stored.doc_id).unwrap_or("")));
            for t in title.iter() {
                terms.entry(t.clone()).or_insert(floor);
            }
        }
        table.set_passage(stored.passage_id.clone(), terms);
    }
    table
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RerankStats {
    /// Number of sparse map lookups performed.
    pub lookups: usize,
}

/// Rescore `candidates` by summed table weights of the query tokens.
pub fn rerank<S: Score>(
    query: &str,
    candidates: &RankedList<S>,
    table: &TermWeightTable<S>,
) -> Result<RankedList<S>, RerankError> {
    rerank_with_stats(query, candidates, table).map(|(list, _)| list)
}

pub fn rerank_with_stats<S: Score>(
    query: &str,
    candidates: &RankedList<S>,
    table: &TermWeightTable<S>,
) -> Result<(RankedList<S>, RerankStats), RerankError> {
    if candidates.is_empty() {
        return Err(RerankError::EmptyCandidates);
    }
    let tokens = tokenize(query);
    let mut stats = RerankStats::default();
    let mut scored = Vec::with_capacity(candidates.len());
    for entry in &candidates.entries {
        let weights = table
            .passage(&entry.passage_id)
            .ok_or_else(|| RerankError::MissingWeights(entry.passage_id.clone()))?;
        let mut score = S::zero();
        for t in &tokens {
            stats.lookups += 1;
            if let Some(&w) = weights.get(t) {
                score = score + w;
            }
        }
        scored.push((entry.passage_id.clone(), score));
    }
    let tag = format!("{}+rerank:{}", candidates.run_tag, table.model_tag);
    let n = scored.len();
    Ok((
        RankedList::from_scored(candidates.query_id.clone(), tag, scored, n),
        stats,
    ))
}

/// BM25 at `first_stage_depth`, rerank, keep `final_k`.
pub fn pipeline_search<S: Score>(
    query: &str,
    index: &Index,
    table: &TermWeightTable<S>,
    cfg: &RerankPipelineConfig<S>,
) -> Result<RankedList<S>, RerankError> {
    cfg.validate()?;
    let first = search_bm25(query, cfg.first_stage_depth, index, &cfg.bm25)?;
    if first.is_empty() {
        let tag = format!("{}+rerank:{}", first.run_tag, table.model_tag);
        return Ok(RankedList::empty(first.query_id, tag));
    }
    let mut out = rerank(query, &first, table)?;
    out.truncate(cfg.final_k);
    Ok(out)
}

/// Stand-in for a cross-encoder second stage: a caller-supplied scorer over
/// (query, passage text) with a fixed simulated cost per scored candidate.
pub struct CrossEncoderStage<F> {
    pub scorer: F,
    pub per_candidate: Duration,
    /// Only the top `depth` candidates are rescored; the rest keep their order below them.
    pub depth: usize,
    pub model_tag: String,
}

impl<F> CrossEncoderStage<F> {
    pub fn rerank<S: Score>(
        &self,
        query: &str,
        candidates: &RankedList<S>,
        index: &Index,
    ) -> Result<RankedList<S>, RerankError>
    where
        F: Fn(&str, &str) -> S,
    {
        let depth = self.depth.min(candidates.len());
        let mut head = Vec::with_capacity(depth);
        for entry in &candidates.entries[..depth] {
            let text = index
                .passage_by_id(&entry.passage_id)
                .map(|p| p.text.as_str())
                .ok_or_else(|| RerankError::MissingWeights(entry.passage_id.clone()))?;
            if !self.per_candidate.is_zero() {
                thread::sleep(self.per_candidate);
            }
            head.push((entry.passage_id.clone(), (self.scorer)(query, text)));
        }
        let tag = format!("{}+xenc:{}", candidates.run_tag, self.model_tag);
        let mut out = RankedList::from_scored(candidates.query_id.clone(), tag, head, depth);
        for entry in &candidates.entries[depth..] {
            let mut e = entry.clone();
            e.rank = out.entries.len() + 1;
            out.entries.push(e);
        }
        Ok(out)
    }
}
