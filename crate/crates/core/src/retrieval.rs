//! First-stage ranking: BM25 and BM25 with RM3 pseudo-relevance feedback.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::tokenize;
use crate::index::{Index, PassageRef};
use crate::run::RankedList;
use crate::scalar::Score;

pub const BM25_TAG: &str = "bm25";
pub const BM25_RM3_TAG: &str = "bm25rm3";

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("query has no terms after analysis")]
    EmptyQueryAfterAnalysis,
    #[error("unknown passage reference {0}")]
    UnknownPassageRef(PassageRef),
    #[error("feedback set is empty")]
    EmptyFeedbackSet,
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params<S> {
    pub k1: S,
    pub b: S,
}

impl<S: Score> Default for Bm25Params<S> {
    fn default() -> Self {
        Self {
            k1: S::from_f64_lossy(0.9),
            b: S::from_f64_lossy(0.4),
        }
    }
}

impl<S: Score> Bm25Params<S> {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1 > S::zero()) {
            return Err(RetrievalError::InvalidParams("k1 must be > 0"));
        }
        if !(self.b >= S::zero() && self.b <= S::one()) {
            return Err(RetrievalError::InvalidParams("b must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rm3Params<S> {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Interpolation weight of the original query model.
    pub orig_weight: S,
}

impl<S: Score> Default for Rm3Params<S> {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 10,
            orig_weight: S::from_f64_lossy(0.5),
        }
    }
}

impl<S: Score> Rm3Params<S> {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.fb_docs == 0 || self.fb_terms == 0 {
            return Err(RetrievalError::InvalidParams("fb_docs and fb_terms must be >= 1"));
        }
        if !(self.orig_weight >= S::zero() && self.orig_weight <= S::one()) {
            return Err(RetrievalError::InvalidParams("orig_weight must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Query model: term to non-negative weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedQuery<S> {
    pub terms: BTreeMap<String, S>,
}

impl<S: Score> WeightedQuery<S> {
    /// Maximum-likelihood distribution of the analyzed query.
    pub fn from_tokens(tokens: &[String]) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
        let total = S::from_count(tokens.len());
        Self {
            terms: counts
                .into_iter()
                .map(|(t, c)| (t, S::from_count(c) / total))
                .collect(),
        }
    }

    pub fn total_weight(&self) -> S {
        self.terms.values().fold(S::zero(), |acc, &w| acc + w)
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`
pub fn idf<S: Score>(n_passages: usize, df: usize) -> S {
    let half = S::from_f64_lossy(0.5);
    let n = S::from_count(n_passages);
    let df = S::from_count(df);
    (S::one() + (n - df + half) / (df + half)).ln()
}

fn saturated_tf<S: Score>(tf: u32, len: u32, avg_len: S, params: &Bm25Params<S>) -> S {
    let tf = S::from_count(tf as usize);
    let len = S::from_count(len as usize);
    let norm = S::one() - params.b + params.b * len / avg_len;
    tf * (params.k1 + S::one()) / (tf + params.k1 * norm)
}

/// BM25 contribution of a single term to a single passage.
pub fn term_contribution<S: Score>(
    term: &str,
    passage_ref: PassageRef,
    index: &Index,
    params: &Bm25Params<S>,
) -> Result<S, RetrievalError> {
    let len = index
        .doc_length(passage_ref)
        .ok_or(RetrievalError::UnknownPassageRef(passage_ref))?;
    let tf = index.term_frequency(term, passage_ref);
    if tf == 0 {
        return Ok(S::zero());
    }
    let avg = S::from_f64_lossy(index.avg_length());
    Ok(idf::<S>(index.n_passages(), index.document_frequency(term)) * saturated_tf(tf, len, avg, params))
}

/// Sum of per-term contributions, once per query-term occurrence.
pub fn bm25_score<S: Score>(
    query_terms: &[String],
    passage_ref: PassageRef,
    index: &Index,
    params: &Bm25Params<S>,
) -> Result<S, RetrievalError> {
    let mut score = S::zero();
    for term in query_terms {
        score = score + term_contribution(term, passage_ref, index, params)?;
    }
    Ok(score)
}

/// Dense accumulator over passage refs that remembers which slots were touched.
struct Accumulator<S> {
    scores: Vec<S>,
    seen: Vec<bool>,
    touched: Vec<PassageRef>,
}

impl<S: Score> Accumulator<S> {
    fn new(n: usize) -> Self {
        Self {
            scores: vec![S::zero(); n],
            seen: vec![false; n],
            touched: Vec::new(),
        }
    }

    /// Adds `weight * contribution(term, p)` for every passage containing `term`.
    fn add_term(&mut self, term: &str, weight: Option<S>, index: &Index, params: &Bm25Params<S>) {
        let Some(postings) = index.postings(term) else {
            return;
        };
        let idf = idf::<S>(index.n_passages(), postings.document_frequency());
        let avg = S::from_f64_lossy(index.avg_length());
        for posting in &postings.entries {
            let r = posting.passage_ref;
            let len = index.doc_length(r).unwrap_or(0);
            let mut c = idf * saturated_tf(posting.term_frequency, len, avg, params);
            if let Some(w) = weight {
                c = w * c;
            }
            if !self.seen[r as usize] {
                self.seen[r as usize] = true;
                self.touched.push(r);
            }
            let slot = &mut self.scores[r as usize];
            *slot = *slot + c;
        }
    }

    fn into_ranked(self, index: &Index, k: usize, tag: &str) -> RankedList<S> {
        let scored = self
            .touched
            .into_iter()
            .filter_map(|r| {
                index
                    .passage(r)
                    .map(|p| (p.passage_id.clone(), self.scores[r as usize]))
            })
            .collect();
        RankedList::from_scored("", tag, scored, k)
    }
}

/// Top-`k` passages by BM25; only passages matching at least one query term
/// are returned.
pub fn search_bm25<S: Score>(
    query: &str,
    k: usize,
    index: &Index,
    params: &Bm25Params<S>,
) -> Result<RankedList<S>, RetrievalError> {
    params.validate()?;
    let tokens = tokenize(query);
    if tokens.is_empty() {
        return Err(RetrievalError::EmptyQueryAfterAnalysis);
    }
    Ok(search_bm25_tokens(&tokens, k, index, params))
}

pub fn search_bm25_tokens<S: Score>(
    tokens: &[String],
    k: usize,
    index: &Index,
    params: &Bm25Params<S>,
) -> RankedList<S> {
    let mut acc = Accumulator::new(index.n_passages());
    for t in tokens {
        acc.add_term(t, None, index, params);
    }
    acc.into_ranked(index, k, BM25_TAG)
}

fn softmax<S: Score>(scores: &[S]) -> Vec<S> {
    let max = scores.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total = exps.iter().fold(S::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// Relevance model from the top feedback passages, interpolated with the
/// original query's maximum-likelihood model.
pub fn rm3_expand<S: Score>(
    query: &str,
    first_pass: &RankedList<S>,
    index: &Index,
    rm3: &Rm3Params<S>,
) -> Result<WeightedQuery<S>, RetrievalError> {
    rm3.validate()?;
    let tokens = tokenize(query);
    if tokens.is_empty() {
        return Err(RetrievalError::EmptyQueryAfterAnalysis);
    }
    let feedback: Vec<_> = first_pass.entries.iter().take(rm3.fb_docs).collect();
    if feedback.is_empty() {
        return Err(RetrievalError::EmptyFeedbackSet);
    }
    let doc_weights = softmax(&feedback.iter().map(|e| e.score).collect::<Vec<_>>());

    let mut relevance: BTreeMap<String, S> = BTreeMap::new();
    for (entry, &w) in feedback.iter().zip(&doc_weights) {
        let Some(stored) = index.passage_by_id(&entry.passage_id) else {
            continue;
        };
        let terms = tokenize(&stored.text);
        if terms.is_empty() {
            continue;
        }
        let len = S::from_count(terms.len());
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in terms {
            *counts.entry(t).or_default() += 1;
        }
        for (t, c) in counts {
            let p = relevance.entry(t).or_insert_with(S::zero);
            *p = *p + w * S::from_count(c) / len;
        }
    }

    let mut ranked: Vec<(String, S)> = relevance.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(rm3.fb_terms);
    let kept = ranked.iter().fold(S::zero(), |acc, (_, p)| acc + *p);

    let lambda = rm3.orig_weight;
    let original = WeightedQuery::<S>::from_tokens(&tokens);
    let mut terms: BTreeMap<String, S> = BTreeMap::new();
    if lambda > S::zero() {
        for (t, w) in original.terms {
            terms.insert(t, lambda * w);
        }
    }
    if lambda < S::one() && kept > S::zero() {
        for (t, p) in ranked {
            let add = (S::one() - lambda) * (p / kept);
            let slot = terms.entry(t).or_insert_with(S::zero);
            *slot = *slot + add;
        }
    }
    terms.retain(|_, w| *w > S::zero());
    Ok(WeightedQuery { terms })
}

/// Scores every passage containing a query-model term by
/// `sum_t weight(t) * bm25({t}, p)`.
pub fn search_weighted<S: Score>(
    query: &WeightedQuery<S>,
    k: usize,
    index: &Index,
    params: &Bm25Params<S>,
) -> RankedList<S> {
    let mut acc = Accumulator::new(index.n_passages());
    for (t, &w) in &query.terms {
        acc.add_term(t, Some(w), index, params);
    }
    acc.into_ranked(index, k, BM25_RM3_TAG)
}

pub fn search_bm25_rm3<S: Score>(
    query: &str,
    k: usize,
    index: &Index,
    bm25: &Bm25Params<S>,
    rm3: &Rm3Params<S>,
) -> Result<RankedList<S>, RetrievalError> {
    rm3.validate()?;
    let first = search_bm25(query, k.max(rm3.fb_docs), index, bm25)?;
    if first.is_empty() {
        return Ok(RankedList::empty("", BM25_RM3_TAG));
    }
    let expanded = rm3_expand(query, &first, index, rm3)?;
    Ok(search_weighted(&expanded, k, index, bm25))
}
