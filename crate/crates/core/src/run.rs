//! Ranked result lists and the six-column run file format.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{rank_order, Score};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry<S> {
    pub passage_id: String,
    pub rank: usize,
    pub score: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList<S> {
    pub query_id: String,
    pub entries: Vec<RunEntry<S>>,
    pub run_tag: String,
}

impl<S: Score> RankedList<S> {
    pub fn empty(query_id: impl Into<String>, run_tag: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            entries: Vec::new(),
            run_tag: run_tag.into(),
        }
    }

    /// Sort `(passage_id, score)` pairs by descending score, ties by ascending
    /// passage id, keep the first `k` and assign dense ranks.
    pub fn from_scored(
        query_id: impl Into<String>,
        run_tag: impl Into<String>,
        mut scored: Vec<(String, S)>,
        k: usize,
    ) -> Self {
        scored.sort_by(|a, b| rank_order((&a.0, a.1), (&b.0, b.1)));
        scored.truncate(k);
        Self {
            query_id: query_id.into(),
            entries: scored
                .into_iter()
                .enumerate()
                .map(|(i, (passage_id, score))| RunEntry {
                    passage_id,
                    rank: i + 1,
                    score,
                })
                .collect(),
            run_tag: run_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn passage_ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.passage_id.as_str()).collect()
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }

    /// Checks dense ranks, non-increasing scores and unique passage ids.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = HashSet::new();
        self.entries.iter().enumerate().all(|(i, e)| {
            e.rank == i + 1
                && seen.insert(e.passage_id.as_str())
                && (i == 0 || self.entries[i - 1].score >= e.score)
        })
    }

    pub fn write_trec<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                self.query_id,
                e.passage_id,
                e.rank,
                e.score.as_f64(),
                self.run_tag
            )?;
        }
        Ok(())
    }
}

/// A run: ranked lists keyed by topic id.
pub type Run<S> = BTreeMap<String, RankedList<S>>;

#[derive(Debug, Error, PartialEq)]
pub enum RunFormatError {
    #[error("line {0}: malformed")]
    MalformedLine(usize),
    #[error("duplicate entry for topic `{0}`, passage `{1}`")]
    DuplicateEntry(String, String),
    #[error("io error: {0}")]
    Io(String),
}

pub fn write_run<W: Write, S: Score>(out: &mut W, run: &Run<S>) -> std::io::Result<()> {
    for list in run.values() {
        list.write_trec(out)?;
    }
    Ok(())
}

/// Parse `<topic> Q0 <passage> <rank> <score> <tag>` lines. Ranks must be
/// dense from 1 within each topic once sorted; duplicates are rejected.
pub fn parse_run<R: BufRead, S: Score>(input: R) -> Result<Run<S>, RunFormatError> {
    let mut raw: BTreeMap<String, (String, Vec<(usize, usize, String, S)>)> = BTreeMap::new();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| RunFormatError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(RunFormatError::MalformedLine(line_no));
        }
        let rank: usize = cols[3]
            .parse()
            .map_err(|_| RunFormatError::MalformedLine(line_no))?;
        let score: S = cols[4]
            .parse()
            .map_err(|_| RunFormatError::MalformedLine(line_no))?;
        if rank == 0 || !score.is_finite() {
            return Err(RunFormatError::MalformedLine(line_no));
        }
        let (topic, passage) = (cols[0].to_string(), cols[2].to_string());
        if !seen.insert((topic.clone(), passage.clone())) {
            return Err(RunFormatError::DuplicateEntry(topic, passage));
        }
        raw.entry(topic)
            .or_insert_with(|| (cols[5].to_string(), Vec::new()))
            .1
            .push((rank, line_no, passage, score));
    }
    let mut run = Run::new();
    for (topic, (tag, mut rows)) in raw {
        rows.sort_by_key(|r| r.0);
        for (i, row) in rows.iter().enumerate() {
            if row.0 != i + 1 {
                return Err(RunFormatError::MalformedLine(row.1));
            }
        }
        let entries = rows
            .into_iter()
            .map(|(rank, _, passage_id, score)| RunEntry {
                passage_id,
                rank,
                score,
            })
            .collect();
        run.insert(
            topic.clone(),
            RankedList {
                query_id: topic,
                entries,
                run_tag: tag,
            },
        );
    }
    Ok(run)
}
