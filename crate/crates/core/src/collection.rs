//! Topics (question, keyword queries, authored answer) and collection statistics.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::tokenize;
use crate::eval::QrelSet;
use crate::fusion::Split;

#[derive(Debug, Error, PartialEq)]
pub enum CollectionError {
    #[error("line {line}: malformed topic: {reason}")]
    MalformedTopic { line: usize, reason: String },
    #[error("duplicate topic id `{0}`")]
    DuplicateTopicId(String),
    #[error("topic set is empty")]
    EmptyTopicSet,
    #[error("need {needed} judged topics, qrels cover {available}")]
    InsufficientTopics { needed: usize, available: usize },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub question: String,
    pub keyword_queries: Vec<String>,
    #[serde(default)]
    pub answer: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_doc_id: Option<String>,
}

/// Which topic field feeds the query string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryField {
    Question,
    /// The first keyword query.
    Query,
}

impl Topic {
    pub fn query_text(&self, field: QueryField) -> &str {
        match field {
            QueryField::Question => &self.question,
            QueryField::Query => self.keyword_queries.first().map_or("", String::as_str),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.topic_id.trim().is_empty() || self.topic_id.chars().any(char::is_whitespace) {
            return Err("topic_id must be non-empty without whitespace".into());
        }
        if tokenize(&self.question).is_empty() {
            return Err("question is empty after analysis".into());
        }
        if self.keyword_queries.is_empty() {
            return Err("no keyword queries".into());
        }
        if let Some(q) = self.keyword_queries.iter().find(|q| tokenize(q).is_empty()) {
            return Err(format!("keyword query `{q}` is empty after analysis"));
        }
        Ok(())
    }
}

pub fn load_topics<R: BufRead>(input: R) -> Result<Vec<Topic>, CollectionError> {
    let mut topics = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CollectionError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| CollectionError::MalformedTopic { line: line_no, reason };
        let topic: Topic = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        topic.validate().map_err(malformed)?;
        if !seen.insert(topic.topic_id.clone()) {
            return Err(CollectionError::DuplicateTopicId(topic.topic_id));
        }
        topics.push(topic);
    }
    Ok(topics)
}

pub fn write_topics<W: Write>(out: &mut W, topics: &[Topic]) -> std::io::Result<()> {
    for t in topics {
        serde_json::to_writer(&mut *out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStats {
    pub n_topics: usize,
    pub mean_queries_per_topic: f64,
    /// Population standard deviation.
    pub sd_queries_per_topic: f64,
    pub mean_question_len_words: f64,
    pub mean_query_len_words: f64,
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

pub fn topic_stats(topics: &[Topic]) -> Result<TopicStats, CollectionError> {
    if topics.is_empty() {
        return Err(CollectionError::EmptyTopicSet);
    }
    let n = topics.len() as f64;
    let counts: Vec<f64> = topics.iter().map(|t| t.keyword_queries.len() as f64).collect();
    let mean_q = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean_q).powi(2)).sum::<f64>() / n;
    let n_queries: usize = topics.iter().map(|t| t.keyword_queries.len()).sum();
    let query_words: usize = topics
        .iter()
        .flat_map(|t| t.keyword_queries.iter())
        .map(|q| words(q))
        .sum();
    Ok(TopicStats {
        n_topics: topics.len(),
        mean_queries_per_topic: mean_q,
        sd_queries_per_topic: var.sqrt(),
        mean_question_len_words: topics.iter().map(|t| words(&t.question)).sum::<usize>() as f64 / n,
        mean_query_len_words: if n_queries == 0 {
            0.0
        } else {
            query_words as f64 / n_queries as f64
        },
    })
}

/// The `n_test` topics with the most judgments (ties by ascending id) form
/// the test split; all others are training topics.
pub fn split_topics(topics: &[Topic], qrels: &QrelSet, n_test: usize) -> Result<(Vec<Topic>, Vec<Topic>), CollectionError> {
    let covered = topics.iter().filter(|t| qrels.judged_count(&t.topic_id) > 0).count();
    if covered < n_test {
        return Err(CollectionError::InsufficientTopics {
            needed: n_test,
            available: covered,
        });
    }
    let mut order: Vec<&Topic> = topics.iter().collect();
    order.sort_by(|a, b| {
        qrels
            .judged_count(&b.topic_id)
            .cmp(&qrels.judged_count(&a.topic_id))
            .then_with(|| a.topic_id.cmp(&b.topic_id))
    });
    let test_ids: HashSet<&str> = order.iter().take(n_test).map(|t| t.topic_id.as_str()).collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for t in topics {
        let mut t = t.clone();
        if test_ids.contains(t.topic_id.as_str()) {
            t.split = Split::Test;
            test.push(t);
        } else {
            t.split = Split::Train;
            train.push(t);
        }
    }
    Ok((train, test))
}
