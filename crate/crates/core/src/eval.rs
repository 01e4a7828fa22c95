//! Graded-relevance evaluation, significance testing and latency measurement.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::io::BufRead;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::fusion::Grade;
use crate::run::{RankedList, Run, RunFormatError};
use crate::scalar::Score;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("line {0}: malformed")]
    MalformedLine(usize),
    #[error("duplicate entry for topic `{0}`, passage `{1}`")]
    DuplicateEntry(String, String),
    #[error("topic `{0}` has no positively graded passage")]
    NoRelevantInQrels(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("score lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no queries to benchmark")]
    NoQueries,
    #[error("system failed on query `{query}`: {message}")]
    SystemError { query: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<RunFormatError> for EvalError {
    fn from(e: RunFormatError) -> Self {
        match e {
            RunFormatError::MalformedLine(n) => EvalError::MalformedLine(n),
            RunFormatError::DuplicateEntry(t, p) => EvalError::DuplicateEntry(t, p),
            RunFormatError::Io(m) => EvalError::Io(m),
        }
    }
}

/// Judged grades per topic. Unjudged passages count as grade 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QrelSet {
    topics: BTreeMap<String, BTreeMap<String, Grade>>,
}

impl QrelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, topic_id: impl Into<String>, passage_id: impl Into<String>, grade: Grade) -> Option<Grade> {
        self.topics
            .entry(topic_id.into())
            .or_default()
            .insert(passage_id.into(), grade)
    }

    pub fn grade(&self, topic_id: &str, passage_id: &str) -> u8 {
        self.topics
            .get(topic_id)
            .and_then(|t| t.get(passage_id))
            .map_or(0, |&g| g as u8)
    }

    pub fn topic(&self, topic_id: &str) -> Option<&BTreeMap<String, Grade>> {
        self.topics.get(topic_id)
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn judged_count(&self, topic_id: &str) -> usize {
        self.topics.get(topic_id).map_or(0, BTreeMap::len)
    }

    pub fn len(&self) -> usize {
        self.topics.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_positive(&self, topic_id: &str) -> bool {
        self.topics
            .get(topic_id)
            .is_some_and(|t| t.values().any(|&g| g > Grade::NonRelevant))
    }
}

/// Parse `<topic> 0 <passage> <grade>` lines.
pub fn parse_qrels<R: BufRead>(input: R) -> Result<QrelSet, EvalError> {
    let mut qrels = QrelSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(EvalError::MalformedLine(line_no));
        }
        let grade = cols[3]
            .parse::<u8>()
            .ok()
            .and_then(|g| Grade::try_from(g).ok())
            .ok_or(EvalError::MalformedLine(line_no))?;
        if qrels.insert(cols[0], cols[2], grade).is_some() {
            return Err(EvalError::DuplicateEntry(cols[0].into(), cols[2].into()));
        }
    }
    Ok(qrels)
}

pub fn parse_run<R: BufRead, S: Score>(input: R) -> Result<Run<S>, EvalError> {
    Ok(crate::run::parse_run(input)?)
}

fn gain<S: Score>(grade: u8) -> S {
    S::from_count((1usize << grade) - 1)
}

fn discount<S: Score>(rank: usize) -> S {
    S::from_count(rank + 1).log2()
}

/// Exponential-gain nDCG over the top `k` ranks.
pub fn ndcg_at_k<S: Score>(ranked: &RankedList<S>, qrels: &QrelSet, k: usize) -> Result<S, EvalError> {
    let topic = &ranked.query_id;
    if !qrels.has_positive(topic) {
        return Err(EvalError::NoRelevantInQrels(topic.clone()));
    }
    let dcg = ranked
        .entries
        .iter()
        .take(k)
        .enumerate()
        .fold(S::zero(), |acc, (i, e)| {
            acc + gain::<S>(qrels.grade(topic, &e.passage_id)) / discount::<S>(i + 1)
        });
    let mut ideal: Vec<u8> = qrels
        .topic(topic)
        .map(|t| t.values().map(|&g| g as u8).collect())
        .unwrap_or_default();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = ideal
        .into_iter()
        .take(k)
        .enumerate()
        .fold(S::zero(), |acc, (i, g)| acc + gain::<S>(g) / discount::<S>(i + 1));
    Ok(dcg / idcg)
}

pub fn reciprocal_rank<S: Score>(ranked: &RankedList<S>, qrels: &QrelSet, threshold: u8) -> S {
    ranked
        .entries
        .iter()
        .position(|e| qrels.grade(&ranked.query_id, &e.passage_id) >= threshold)
        .map_or(S::zero(), |i| S::one() / S::from_count(i + 1))
}

pub fn success_at_k<S: Score>(ranked: &RankedList<S>, qrels: &QrelSet, k: usize, threshold: u8) -> S {
    let hit = ranked
        .entries
        .iter()
        .take(k)
        .any(|e| qrels.grade(&ranked.query_id, &e.passage_id) >= threshold);
    if hit {
        S::one()
    } else {
        S::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Ndcg(usize),
    ReciprocalRank,
    Success(usize),
}

impl Metric {
    pub const DEFAULT_SET: [Metric; 4] = [
        Metric::Ndcg(5),
        Metric::ReciprocalRank,
        Metric::Success(3),
        Metric::Success(100),
    ];

    pub fn parse_list(spec: &str) -> Result<Vec<Metric>, EvalError> {
        spec.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::ReciprocalRank => write!(f, "rr"),
            Metric::Success(k) => write!(f, "success@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || EvalError::UnknownMetric(s.to_string());
        if s == "rr" {
            return Ok(Metric::ReciprocalRank);
        }
        let (name, k) = s.split_once('@').ok_or_else(unknown)?;
        let k: usize = k.parse().map_err(|_| unknown())?;
        if k == 0 {
            return Err(unknown());
        }
        match name {
            "ndcg" => Ok(Metric::Ndcg(k)),
            "success" => Ok(Metric::Success(k)),
            _ => Err(unknown()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScores<S> {
    pub topic_id: String,
    /// Aligned with [`EvalReport::metrics`]; `None` when undefined for the topic.
    pub values: Vec<Option<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<S> {
    pub run_tag: String,
    pub metrics: Vec<Metric>,
    pub per_topic: Vec<TopicScores<S>>,
    pub means: Vec<S>,
    /// Topics excluded from each metric's mean.
    pub skipped: Vec<usize>,
    /// Run topics that have no qrels and were not evaluated.
    pub unjudged_topics: Vec<String>,
}

/// Scores every qrels topic (missing run topics count as empty lists).
pub fn evaluate_run<S: Score>(run: &Run<S>, qrels: &QrelSet, metrics: &[Metric], threshold: u8) -> EvalReport<S> {
    let mut per_topic = Vec::new();
    let mut sums = vec![S::zero(); metrics.len()];
    let mut counts = vec![0usize; metrics.len()];
    for topic in qrels.topic_ids() {
        let empty;
        let list = match run.get(topic) {
            Some(l) => l,
            None => {
                empty = RankedList::empty(topic, "");
                &empty
            }
        };
        let values: Vec<Option<S>> = metrics
            .iter()
            .map(|m| match m {
                Metric::Ndcg(k) => ndcg_at_k(list, qrels, *k).ok(),
                Metric::ReciprocalRank => Some(reciprocal_rank(list, qrels, threshold)),
                Metric::Success(k) => Some(success_at_k(list, qrels, *k, threshold)),
            })
            .collect();
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                sums[i] = sums[i] + *v;
                counts[i] += 1;
            }
        }
        per_topic.push(TopicScores {
            topic_id: topic.to_string(),
            values,
        });
    }
    let n_topics = per_topic.len();
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { S::zero() } else { s / S::from_count(c) })
        .collect();
    let run_tag = run
        .values()
        .next()
        .map(|l| l.run_tag.clone())
        .unwrap_or_default();
    EvalReport {
        run_tag,
        metrics: metrics.to_vec(),
        per_topic,
        means,
        skipped: counts.iter().map(|c| n_topics - c).collect(),
        unjudged_topics: run
            .keys()
            .filter(|t| qrels.topic(t).is_none())
            .cloned()
            .collect(),
    }
}

impl<S: Score> EvalReport<S> {
    pub fn mean(&self, metric: Metric) -> Option<S> {
        self.metrics
            .iter()
            .position(|m| *m == metric)
            .map(|i| self.means[i])
    }

    /// Per-topic values of one metric, `None` entries dropped.
    pub fn topic_values(&self, metric: Metric) -> BTreeMap<String, S> {
        let Some(i) = self.metrics.iter().position(|m| *m == metric) else {
            return BTreeMap::new();
        };
        self.per_topic
            .iter()
            .filter_map(|t| t.values[i].map(|v| (t.topic_id.clone(), v)))
            .collect()
    }

    /// Aligned plain-text table; per-topic rows first when requested.
    pub fn to_table(&self, per_topic: bool) -> String {
        let mut out = String::new();
        if per_topic {
            for t in &self.per_topic {
                for (m, v) in self.metrics.iter().zip(&t.values) {
                    let value = v.map_or("-".to_string(), |v| format!("{:.4}", v.as_f64()));
                    out.push_str(&format!("{:<14} {:<20} {}\n", m.to_string(), t.topic_id, value));
                }
            }
        }
        for ((m, v), skipped) in self.metrics.iter().zip(&self.means).zip(&self.skipped) {
            out.push_str(&format!("{:<14} {:<20} {:.4}", m.to_string(), "all", v.as_f64()));
            if *skipped > 0 {
                out.push_str(&format!("  (skipped {skipped})"));
            }
            out.push('\n');
        }
        out
    }

    /// One JSON object per (topic, metric) plus one per mean.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |topic: &str, metric: &Metric, value: Option<f64>| {
            let line = serde_json::json!({
                "run_tag": self.run_tag,
                "topic": topic,
                "metric": metric.to_string(),
                "value": value,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        };
        for t in &self.per_topic {
            for (m, v) in self.metrics.iter().zip(&t.values) {
                push(&t.topic_id, m, v.map(Score::as_f64));
            }
        }
        for (m, v) in self.metrics.iter().zip(&self.means) {
            push("all", m, Some(v.as_f64()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// `None` when the test is degenerate.
    pub t: Option<f64>,
    /// Two-sided p-value; 1.0 when degenerate.
    pub p: f64,
    pub n: usize,
    pub degenerate: bool,
}

/// Paired t-test on per-topic scores.
pub fn paired_t_test<S: Score>(a: &[S], b: &[S]) -> Result<TTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    let degenerate = TTest {
        t: None,
        p: 1.0,
        n,
        degenerate: true,
    };
    if n < 2 {
        return Ok(degenerate);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.as_f64() - y.as_f64()).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if var.sqrt() <= 1e-12 * scale {
        return Ok(degenerate);
    }
    let t = mean / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("valid degrees of freedom");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest {
        t: Some(t),
        p,
        n,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub system: String,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub n_queries: usize,
    pub warmup_queries: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub warmup: usize,
    pub repeats: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { warmup: 5, repeats: 3 }
    }
}

/// Times `system` over `queries` on the calling thread, keeping the best of
/// `repeats` runs per query after `warmup` unmeasured calls.
pub fn benchmark_latency<F, R, E>(
    name: &str,
    mut system: F,
    queries: &[String],
    opts: BenchOptions,
) -> Result<LatencyReport, EvalError>
where
    F: FnMut(&str) -> Result<R, E>,
    E: Display,
{
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let fail = |q: &str, e: E| EvalError::SystemError {
        query: q.to_string(),
        message: e.to_string(),
    };
    for q in queries.iter().cycle().take(opts.warmup) {
        std::hint::black_box(system(q).map_err(|e| fail(q, e))?);
    }
    let mut best = Vec::with_capacity(queries.len());
    for q in queries {
        let mut fastest = Duration::MAX;
        for _ in 0..opts.repeats.max(1) {
            let start = Instant::now();
            let out = system(q).map_err(|e| fail(q, e))?;
            let elapsed = start.elapsed();
            std::hint::black_box(out);
            fastest = fastest.min(elapsed);
        }
        best.push(fastest.as_secs_f64() * 1e3);
    }
    best.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = best.len();
    let mean = best.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        best[n / 2]
    } else {
        (best[n / 2 - 1] + best[n / 2]) / 2.0
    };
    let p95 = best[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
    Ok(LatencyReport {
        system: name.to_string(),
        mean_ms: mean,
        median_ms: median,
        p95_ms: p95,
        n_queries: n,
        warmup_queries: opts.warmup,
    })
}
