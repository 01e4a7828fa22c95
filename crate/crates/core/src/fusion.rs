//! Reciprocal rank fusion, judging pools and the assessment stopping rules.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::run::RankedList;
use crate::scalar::Score;

pub const DEFAULT_RRF_K: usize = 60;
pub const POOL_DEPTH: usize = 100;
pub const RRF_TAG: &str = "rrf";

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("runs disagree on topic: `{0}` vs `{1}`")]
    TopicMismatch(String, String),
    #[error("no runs to fuse")]
    NoRuns,
    #[error("judgments are not a prefix of the pool queue (at position {0})")]
    NonPrefixJudgments(usize),
    #[error("invalid grade {0}")]
    InvalidGrade(u8),
    #[error("line {0}: malformed judgment")]
    MalformedJudgment(usize),
}

/// Graded relevance: 0 non-relevant, 1 marginal, 2 relevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Grade {
    NonRelevant = 0,
    Marginal = 1,
    Relevant = 2,
}

impl TryFrom<u8> for Grade {
    type Error = FusionError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Grade::NonRelevant),
            1 => Ok(Grade::Marginal),
            2 => Ok(Grade::Relevant),
            other => Err(FusionError::InvalidGrade(other)),
        }
    }
}

impl From<Grade> for u8 {
    fn from(g: Grade) -> u8 {
        g as u8
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub topic_id: String,
    pub passage_id: String,
    pub grade: Grade,
    pub assessor: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub topic_id: String,
    pub queue: Vec<String>,
    pub split: Split,
}

/// `score(p) = sum over runs containing p of 1 / (k_rrf + rank)`.
///
/// Per-passage contributions are summed in ascending order so the result does
/// not depend on the order of `runs`.
pub fn rrf_fuse<S: Score>(runs: &[RankedList<S>], k_rrf: usize) -> Result<RankedList<S>, FusionError> {
    let first = runs.first().ok_or(FusionError::NoRuns)?;
    if let Some(other) = runs.iter().find(|r| r.query_id != first.query_id) {
        return Err(FusionError::TopicMismatch(
            first.query_id.clone(),
            other.query_id.clone(),
        ));
    }
    let mut contributions: HashMap<&str, Vec<S>> = HashMap::new();
    for run in runs {
        for entry in &run.entries {
            contributions
                .entry(entry.passage_id.as_str())
                .or_default()
                .push(S::one() / S::from_count(k_rrf + entry.rank));
        }
    }
    let scored: Vec<(String, S)> = contributions
        .into_iter()
        .map(|(id, mut parts)| {
            parts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            (id.to_string(), parts.into_iter().fold(S::zero(), |a, b| a + b))
        })
        .collect();
    let n = scored.len();
    Ok(RankedList::from_scored(first.query_id.clone(), RRF_TAG, scored, n))
}

pub fn build_pool<S: Score>(topic_id: &str, runs: &[RankedList<S>], split: Split) -> Result<Pool, FusionError> {
    if let Some(other) = runs.iter().find(|r| r.query_id != topic_id) {
        return Err(FusionError::TopicMismatch(
            topic_id.to_string(),
            other.query_id.clone(),
        ));
    }
    let fused = rrf_fuse(runs, DEFAULT_RRF_K)?;
    Ok(Pool {
        topic_id: topic_id.to_string(),
        queue: fused
            .entries
            .into_iter()
            .take(POOL_DEPTH)
            .map(|e| e.passage_id)
            .collect(),
        split,
    })
}

/// How deep assessors go for each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub train_depth: usize,
    pub test_min_depth: usize,
    pub test_max_depth: usize,
    /// Grade that ends the extended test-split search.
    pub relevant_grade: Grade,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            train_depth: 10,
            test_min_depth: 20,
            test_max_depth: POOL_DEPTH,
            relevant_grade: Grade::Relevant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextItem {
    Judge(String),
    Done,
}

impl Pool {
    /// Next passage to judge given this assessor's judgments so far, which
    /// must be exactly the first `judgments.len()` queue items in order.
    pub fn next_for_judgment(&self, judgments: &[Judgment], rule: &StoppingRule) -> Result<NextItem, FusionError> {
        for (i, j) in judgments.iter().enumerate() {
            if j.topic_id != self.topic_id {
                return Err(FusionError::TopicMismatch(self.topic_id.clone(), j.topic_id.clone()));
            }
            if self.queue.get(i) != Some(&j.passage_id) {
                return Err(FusionError::NonPrefixJudgments(i));
            }
        }
        let judged = judgments.len();
        let limit = match self.split {
            Split::Train => rule.train_depth,
            Split::Test => {
                let found = judgments.iter().any(|j| j.grade >= rule.relevant_grade);
                if judged >= rule.test_min_depth && found {
                    return Ok(NextItem::Done);
                }
                rule.test_max_depth
            }
        };
        if judged >= limit || judged >= self.queue.len() {
            return Ok(NextItem::Done);
        }
        Ok(NextItem::Judge(self.queue[judged].clone()))
    }
}

/// Append-only judgment history. Replaying keeps the latest judgment for each
/// (topic, passage, assessor) at the position of its first occurrence.
#[derive(Debug, Clone, Default)]
pub struct JudgmentLog {
    events: Vec<Judgment>,
}

impl JudgmentLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, j: Judgment) {
        self.events.push(j);
    }

    pub fn events(&self) -> &[Judgment] {
        &self.events
    }

    pub fn latest(&self) -> Vec<Judgment> {
        let mut position: HashMap<(&str, &str, &str), usize> = HashMap::new();
        let mut out: Vec<Judgment> = Vec::new();
        for j in &self.events {
            let key = (j.topic_id.as_str(), j.passage_id.as_str(), j.assessor.as_str());
            match position.get(&key) {
                Some(&i) => out[i] = j.clone(),
                None => {
                    position.insert(key, out.len());
                    out.push(j.clone());
                }
            }
        }
        out
    }

    /// Latest judgments of one assessor on one topic, in judging order.
    pub fn for_assessor(&self, topic_id: &str, assessor: &str) -> Vec<Judgment> {
        self.latest()
            .into_iter()
            .filter(|j| j.topic_id == topic_id && j.assessor == assessor)
            .collect()
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, FusionError> {
        let mut log = Self::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line.map_err(|_| FusionError::MalformedJudgment(idx + 1))?;
            if line.trim().is_empty() {
                continue;
            }
            let j: Judgment = serde_json::from_str(&line).map_err(|_| FusionError::MalformedJudgment(idx + 1))?;
            log.append(j);
        }
        Ok(log)
    }

    /// Qrels lines `<topic> 0 <passage> <grade>`, sorted by topic then
    /// passage. When several assessors judged a passage the last one logged wins.
    pub fn write_qrels<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut qrels: BTreeMap<(&str, &str), Grade> = BTreeMap::new();
        for j in &self.events {
            qrels.insert((j.topic_id.as_str(), j.passage_id.as_str()), j.grade);
        }
        for ((topic, passage), grade) in qrels {
            writeln!(out, "{topic} 0 {passage} {grade}")?;
        }
        Ok(())
    }
}
