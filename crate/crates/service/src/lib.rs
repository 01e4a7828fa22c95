//! Conversational answer service, interaction logging, known-item topic
//! authoring and the relevance-assessment backend.
//!
//! All durable state lives in append-only JSON-lines stores under one
//! directory and is replayed when a [`Service`] is opened, so a restarted
//! service answers read requests exactly as before.

pub mod http;
mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use passearch_core::analysis::token_spans;
use passearch_core::fusion::{FusionError, Grade, Judgment, JudgmentLog, NextItem, Pool, Split, StoppingRule};
use passearch_core::rerank::{pipeline_search, RerankError};
use passearch_core::retrieval::RetrievalError;
use passearch_core::{tokenize, Document, Index, RankedList, RerankPipelineConfig, TermWeightTable, Topic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use store::AppendLog;

pub use http::router;

pub const REPHRASE_MESSAGE: &str =
    "Sorry, I could not find any search terms in that message. Could you rephrase it?";
pub const NO_MATCH_MESSAGE: &str = "Sorry, no passage matched that question.";
pub const DEFAULT_ASSESSOR: &str = "author";
pub const KNOWN_ITEM_PREFIX: &str = "ki-";

const TURNS_FILE: &str = "turns.jsonl";
const EVENTS_FILE: &str = "events.jsonl";
const JUDGMENTS_FILE: &str = "judgments.jsonl";
const TOPICS_FILE: &str = "topics.jsonl";

#[derive(Debug, Error, PartialEq)]
pub enum ServiceError {
    #[error("index and weight table are not loaded")]
    ServiceUnavailable,
    #[error("message text is empty")]
    EmptyMessage,
    #[error("unknown turn `{turn_id}` in session `{session_id}`")]
    UnknownTurn { session_id: String, turn_id: String },
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error("expected judgment for `{expected}`, got `{got}`")]
    OutOfOrderJudgment { expected: String, got: String },
    #[error("grade {0} is not one of 0, 1, 2")]
    InvalidGrade(u8),
    #[error("every document is excluded")]
    Exhausted,
    #[error("no selected passage is graded relevant or marginal")]
    NoRelevantPassage,
    #[error("question is empty after analysis")]
    MissingQuestion,
    #[error("at least one non-empty keyword query is required")]
    MissingKeywordQuery,
    #[error("passage `{passage_id}` is not part of document `{doc_id}`")]
    PassageNotInDocument { passage_id: String, doc_id: String },
    #[error("duplicate topic id `{0}`")]
    DuplicateTopic(String),
    #[error("search failed: {0}")]
    Search(String),
    #[error("storage error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}

impl ServiceError {
    /// Stable machine-readable name used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::ServiceUnavailable => "service_unavailable",
            ServiceError::EmptyMessage => "empty_message",
            ServiceError::UnknownTurn { .. } => "unknown_turn",
            ServiceError::UnknownTopic(_) => "unknown_topic",
            ServiceError::UnknownDocument(_) => "unknown_document",
            ServiceError::OutOfOrderJudgment { .. } => "out_of_order_judgment",
            ServiceError::InvalidGrade(_) => "invalid_grade",
            ServiceError::Exhausted => "exhausted",
            ServiceError::NoRelevantPassage => "no_relevant_passage",
            ServiceError::MissingQuestion => "missing_question",
            ServiceError::MissingKeywordQuery => "missing_keyword_query",
            ServiceError::PassageNotInDocument { .. } => "passage_not_in_document",
            ServiceError::DuplicateTopic(_) => "duplicate_topic",
            ServiceError::Search(_) => "search_failed",
            ServiceError::Io(_) => "storage_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassagePayload {
    pub passage_id: String,
    pub doc_id: String,
    pub text: String,
    /// The parent document's `source_url`, or `/doc/{doc_id}` when it has none.
    pub source_link: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub session_id: String,
    pub turn_id: String,
    pub user_text: String,
    /// Rank 1 of the pipeline; absent when nothing could be retrieved.
    pub answer: Option<PassagePayload>,
    /// Ranks 2 to 5.
    pub more_answers: Vec<PassagePayload>,
    /// Canned text shown instead of an answer.
    pub message: Option<String>,
    /// Reserved for mixed-initiative clarifying questions; never populated.
    pub clarifying_question: Option<String>,
    pub run_tag: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Click,
    Like,
    Emoji,
    MoreAnswerSelected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub session_id: String,
    pub turn_id: String,
    pub kind: InteractionKind,
    #[serde(default)]
    pub target_passage_id: Option<String>,
    #[serde(default)]
    pub payload: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub start: usize,
    pub end: usize,
    pub term: String,
}

/// Spans over every analyzed passage token that also occurs in the analyzed
/// question. Offsets are in characters and cover the original surface form.
pub fn highlight_terms(question: &str, passage_text: &str) -> Vec<HighlightSpan> {
    let wanted: BTreeSet<String> = tokenize(question).into_iter().collect();
    token_spans(passage_text)
        .into_iter()
        .filter(|t| wanted.contains(&t.term))
        .map(|t| HighlightSpan {
            start: t.start,
            end: t.end,
            term: t.term,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AssessmentItem {
    Judge {
        topic_id: String,
        question: String,
        /// 1-based position of the passage in the pool queue.
        position: usize,
        queue_length: usize,
        passage: PassagePayload,
        highlights: Vec<HighlightSpan>,
    },
    Done {
        topic_id: String,
        judged: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentAck {
    pub topic_id: String,
    pub passage_id: String,
    pub grade: Grade,
    pub assessor: String,
    pub judged: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedPassage {
    pub passage_id: String,
    pub grade: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicDraft {
    pub question: String,
    pub keyword_queries: Vec<String>,
    #[serde(default)]
    pub answer: String,
    pub source_doc_id: String,
    pub passages: Vec<SelectedPassage>,
    #[serde(default)]
    pub assessor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthoredTopic {
    pub topic: Topic,
    pub judgments: Vec<Judgment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub index_loaded: bool,
    pub passages: usize,
    pub documents: usize,
    pub topics: usize,
    pub pools: usize,
}

struct Engine {
    index: Index,
    table: TermWeightTable,
    pipeline: RerankPipelineConfig,
}

struct State {
    turns: Vec<ConversationTurn>,
    turn_by_id: HashMap<(String, String), usize>,
    events: Vec<InteractionEvent>,
    judgments: JudgmentLog,
    topics: BTreeMap<String, Topic>,
    n_authored: usize,
    turn_log: AppendLog<ConversationTurn>,
    event_log: AppendLog<InteractionEvent>,
    judgment_log: AppendLog<Judgment>,
    topic_log: AppendLog<Topic>,
}

pub struct Service {
    engine: Option<Engine>,
    documents: BTreeMap<String, Document>,
    pools: BTreeMap<String, Pool>,
    rule: StoppingRule,
    rng: Mutex<ChaCha8Rng>,
    state: Mutex<State>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn search_error(e: RerankError) -> ServiceError {
    ServiceError::Search(e.to_string())
}

impl Service {
    /// Opens the stores under `store_dir` (created if missing) and replays
    /// them. Retrieval, documents, pools and topics are attached afterwards.
    pub fn open(store_dir: &Path, seed: u64) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(store_dir)?;
        let (turn_log, turns) = AppendLog::<ConversationTurn>::open(&store_dir.join(TURNS_FILE))?;
        let (event_log, events) = AppendLog::<InteractionEvent>::open(&store_dir.join(EVENTS_FILE))?;
        let (judgment_log, judged) = AppendLog::<Judgment>::open(&store_dir.join(JUDGMENTS_FILE))?;
        let (topic_log, authored) = AppendLog::<Topic>::open(&store_dir.join(TOPICS_FILE))?;

        let turn_by_id = turns
            .iter()
            .enumerate()
            .map(|(i, t)| ((t.session_id.clone(), t.turn_id.clone()), i))
            .collect();
        let mut judgments = JudgmentLog::new();
        for j in judged {
            judgments.append(j);
        }
        let n_authored = authored.len();
        let mut topics = BTreeMap::new();
        for t in authored {
            if topics.insert(t.topic_id.clone(), t.clone()).is_some() {
                return Err(ServiceError::DuplicateTopic(t.topic_id));
            }
        }
        Ok(Self {
            engine: None,
            documents: BTreeMap::new(),
            pools: BTreeMap::new(),
            rule: StoppingRule::default(),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            state: Mutex::new(State {
                turns,
                turn_by_id,
                events,
                judgments,
                topics,
                n_authored,
                turn_log,
                event_log,
                judgment_log,
                topic_log,
            }),
        })
    }

    /// Attaches the answer pipeline: BM25 to depth 1000, reranked, top 5 kept.
    pub fn with_engine(mut self, index: Index, table: TermWeightTable) -> Self {
        let pipeline = RerankPipelineConfig {
            first_stage_depth: 1000,
            final_k: 5,
            ..Default::default()
        };
        self.engine = Some(Engine { index, table, pipeline });
        self
    }

    pub fn with_documents(mut self, documents: Vec<Document>) -> Self {
        self.documents = documents.into_iter().map(|d| (d.doc_id.clone(), d)).collect();
        self
    }

    pub fn with_pools(mut self, pools: Vec<Pool>) -> Self {
        self.pools = pools.into_iter().map(|p| (p.topic_id.clone(), p)).collect();
        self
    }

    pub fn with_topics(self, topics: Vec<Topic>) -> Result<Self, ServiceError> {
        {
            let mut state = self.lock();
            for t in topics {
                if state.topics.contains_key(&t.topic_id) {
                    return Err(ServiceError::DuplicateTopic(t.topic_id));
                }
                state.topics.insert(t.topic_id.clone(), t);
            }
        }
        Ok(self)
    }

    pub fn with_stopping_rule(mut self, rule: StoppingRule) -> Self {
        self.rule = rule;
        self
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn source_link(&self, doc_id: &str) -> String {
        self.documents
            .get(doc_id)
            .and_then(|d| d.source_url.clone())
            .unwrap_or_else(|| format!("/doc/{doc_id}"))
    }

    fn payload(&self, passage_id: &str, score: f64) -> Option<PassagePayload> {
        let stored = self.engine.as_ref()?.index.passage_by_id(passage_id)?;
        Some(PassagePayload {
            passage_id: stored.passage_id.clone(),
            doc_id: stored.doc_id.clone(),
            text: stored.text.clone(),
            source_link: self.source_link(&stored.doc_id),
            score,
        })
    }

    /// The ranked list the chat answer is built from.
    pub fn answer_list(&self, text: &str) -> Result<RankedList, ServiceError> {
        let engine = self.engine.as_ref().ok_or(ServiceError::ServiceUnavailable)?;
        pipeline_search(text, &engine.index, &engine.table, &engine.pipeline).map_err(search_error)
    }

    pub fn handle_message(&self, session_id: &str, text: &str) -> Result<ConversationTurn, ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::EmptyMessage);
        }
        let engine = self.engine.as_ref().ok_or(ServiceError::ServiceUnavailable)?;
        let searched = pipeline_search(text, &engine.index, &engine.table, &engine.pipeline);
        let (answer, more_answers, message, run_tag) = match searched {
            Ok(list) => {
                let mut payloads = list
                    .entries
                    .iter()
                    .map(|e| self.payload(&e.passage_id, e.score))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| ServiceError::Search("ranked passage missing from index".into()))?;
                if payloads.is_empty() {
                    (None, Vec::new(), Some(NO_MATCH_MESSAGE.to_string()), list.run_tag)
                } else {
                    let rest = payloads.split_off(1);
                    (payloads.pop(), rest, None, list.run_tag)
                }
            }
            Err(RerankError::Retrieval(RetrievalError::EmptyQueryAfterAnalysis)) => {
                (None, Vec::new(), Some(REPHRASE_MESSAGE.to_string()), String::new())
            }
            Err(e) => return Err(search_error(e)),
        };

        let mut state = self.lock();
        let turn = ConversationTurn {
            session_id: session_id.to_string(),
            turn_id: format!("turn-{}", state.turns.len() + 1),
            user_text: text.to_string(),
            answer,
            more_answers,
            message,
            clarifying_question: None,
            run_tag,
            timestamp: now_ms(),
        };
        state.turn_log.append(&turn)?;
        let key = (turn.session_id.clone(), turn.turn_id.clone());
        let at = state.turns.len();
        state.turn_by_id.insert(key, at);
        state.turns.push(turn.clone());
        Ok(turn)
    }

    pub fn session_turns(&self, session_id: &str) -> Vec<ConversationTurn> {
        self.lock()
            .turns
            .iter()
            .filter(|t| t.session_id == session_id)
            .cloned()
            .collect()
    }

    pub fn record_interaction(&self, event: InteractionEvent) -> Result<usize, ServiceError> {
        let mut state = self.lock();
        let key = (event.session_id.clone(), event.turn_id.clone());
        if !state.turn_by_id.contains_key(&key) {
            return Err(ServiceError::UnknownTurn {
                session_id: event.session_id,
                turn_id: event.turn_id,
            });
        }
        state.event_log.append(&event)?;
        state.events.push(event);
        Ok(state.events.len())
    }

    pub fn session_events(&self, session_id: &str) -> Vec<InteractionEvent> {
        self.lock()
            .events
            .iter()
            .filter(|e| e.session_id == session_id)
            .cloned()
            .collect()
    }

    pub fn events(&self) -> Vec<InteractionEvent> {
        self.lock().events.clone()
    }

    fn pool(&self, topic_id: &str) -> Result<&Pool, ServiceError> {
        self.pools
            .get(topic_id)
            .ok_or_else(|| ServiceError::UnknownTopic(topic_id.to_string()))
    }

    fn next_item(&self, state: &State, pool: &Pool, assessor: &str) -> Result<NextItem, ServiceError> {
        let judged = state.judgments.for_assessor(&pool.topic_id, assessor);
        pool.next_for_judgment(&judged, &self.rule).map_err(|e| match e {
            FusionError::NonPrefixJudgments(i) => ServiceError::OutOfOrderJudgment {
                expected: pool.queue.get(i).cloned().unwrap_or_default(),
                got: judged[i].passage_id.clone(),
            },
            other => ServiceError::Io(other.to_string()),
        })
    }

    pub fn next_assessment_item(&self, topic_id: &str, assessor: &str) -> Result<AssessmentItem, ServiceError> {
        let pool = self.pool(topic_id)?;
        let state = self.lock();
        let question = state.topics.get(topic_id).map(|t| t.question.clone()).unwrap_or_default();
        let judged = state.judgments.for_assessor(topic_id, assessor).len();
        match self.next_item(&state, pool, assessor)? {
            NextItem::Done => Ok(AssessmentItem::Done {
                topic_id: topic_id.to_string(),
                judged,
            }),
            NextItem::Judge(passage_id) => {
                let passage = self.payload(&passage_id, 0.0).ok_or(ServiceError::ServiceUnavailable)?;
                let highlights = highlight_terms(&question, &passage.text);
                Ok(AssessmentItem::Judge {
                    topic_id: topic_id.to_string(),
                    question,
                    position: judged + 1,
                    queue_length: pool.queue.len(),
                    passage,
                    highlights,
                })
            }
        }
    }

    /// Accepts a grade only for the assessor's current head item.
    pub fn submit_judgment(
        &self,
        topic_id: &str,
        passage_id: &str,
        grade: u8,
        assessor: &str,
    ) -> Result<JudgmentAck, ServiceError> {
        let grade = Grade::try_from(grade).map_err(|_| ServiceError::InvalidGrade(grade))?;
        let pool = self.pool(topic_id)?;
        let mut state = self.lock();
        match self.next_item(&state, pool, assessor)? {
            NextItem::Judge(head) if head == passage_id => {}
            NextItem::Judge(head) => {
                return Err(ServiceError::OutOfOrderJudgment {
                    expected: head,
                    got: passage_id.to_string(),
                })
            }
            NextItem::Done => {
                return Err(ServiceError::OutOfOrderJudgment {
                    expected: String::new(),
                    got: passage_id.to_string(),
                })
            }
        }
        let judgment = Judgment {
            topic_id: topic_id.to_string(),
            passage_id: passage_id.to_string(),
            grade,
            assessor: assessor.to_string(),
            timestamp: now_ms(),
        };
        state.judgment_log.append(&judgment)?;
        state.judgments.append(judgment);
        Ok(JudgmentAck {
            topic_id: topic_id.to_string(),
            passage_id: passage_id.to_string(),
            grade,
            assessor: assessor.to_string(),
            judged: state.judgments.for_assessor(topic_id, assessor).len(),
        })
    }

    pub fn judgments(&self) -> Vec<Judgment> {
        self.lock().judgments.events().to_vec()
    }

    /// Qrels text over every logged judgment.
    pub fn export_qrels(&self) -> String {
        let mut out = Vec::new();
        self.lock()
            .judgments
            .write_qrels(&mut out)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("qrels are ASCII")
    }

    pub fn document(&self, doc_id: &str) -> Result<Document, ServiceError> {
        self.documents
            .get(doc_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownDocument(doc_id.to_string()))
    }

    /// Uniform draw over documents not in `exclude`.
    pub fn random_document(&self, exclude: &BTreeSet<String>) -> Result<Document, ServiceError> {
        let candidates: Vec<&Document> = self
            .documents
            .values()
            .filter(|d| !exclude.contains(&d.doc_id))
            .collect();
        if candidates.is_empty() {
            return Err(ServiceError::Exhausted);
        }
        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        Ok(candidates[rng.random_range(0..candidates.len())].clone())
    }

    fn passage_in_document(&self, passage_id: &str, doc_id: &str) -> bool {
        match &self.engine {
            Some(engine) => engine
                .index
                .passage_by_id(passage_id)
                .is_some_and(|p| p.doc_id == doc_id),
            None => passage_id
                .rsplit_once('-')
                .is_some_and(|(doc, n)| doc == doc_id && n.parse::<usize>().is_ok_and(|n| n > 0)),
        }
    }

    pub fn submit_known_item_topic(&self, draft: TopicDraft) -> Result<AuthoredTopic, ServiceError> {
        if tokenize(&draft.question).is_empty() {
            return Err(ServiceError::MissingQuestion);
        }
        let queries: Vec<String> = draft
            .keyword_queries
            .iter()
            .map(|q| q.trim().to_string())
            .filter(|q| !tokenize(q).is_empty())
            .collect();
        if queries.is_empty() {
            return Err(ServiceError::MissingKeywordQuery);
        }
        if !self.documents.contains_key(&draft.source_doc_id) {
            return Err(ServiceError::UnknownDocument(draft.source_doc_id));
        }
        let mut graded = Vec::with_capacity(draft.passages.len());
        for p in &draft.passages {
            let grade = Grade::try_from(p.grade).map_err(|_| ServiceError::InvalidGrade(p.grade))?;
            if !self.passage_in_document(&p.passage_id, &draft.source_doc_id) {
                return Err(ServiceError::PassageNotInDocument {
                    passage_id: p.passage_id.clone(),
                    doc_id: draft.source_doc_id.clone(),
                });
            }
            graded.push((p.passage_id.clone(), grade));
        }
        if !graded.iter().any(|(_, g)| *g >= Grade::Marginal) {
            return Err(ServiceError::NoRelevantPassage);
        }

        let mut state = self.lock();
        let mut n = state.n_authored + 1;
        let topic_id = loop {
            let id = format!("{KNOWN_ITEM_PREFIX}{n}");
            if !state.topics.contains_key(&id) {
                break id;
            }
            n += 1;
        };
        let topic = Topic {
            topic_id: topic_id.clone(),
            question: draft.question.trim().to_string(),
            keyword_queries: queries,
            answer: draft.answer,
            split: Split::Train,
            source_doc_id: Some(draft.source_doc_id),
        };
        let assessor = draft.assessor.unwrap_or_else(|| DEFAULT_ASSESSOR.to_string());
        let timestamp = now_ms();
        let judgments: Vec<Judgment> = graded
            .into_iter()
            .map(|(passage_id, grade)| Judgment {
                topic_id: topic_id.clone(),
                passage_id,
                grade,
                assessor: assessor.clone(),
                timestamp,
            })
            .collect();
        state.topic_log.append(&topic)?;
        for j in &judgments {
            state.judgment_log.append(j)?;
            state.judgments.append(j.clone());
        }
        state.topics.insert(topic_id, topic.clone());
        state.n_authored += 1;
        Ok(AuthoredTopic { topic, judgments })
    }

    pub fn topic(&self, topic_id: &str) -> Result<Topic, ServiceError> {
        self.lock()
            .topics
            .get(topic_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownTopic(topic_id.to_string()))
    }

    pub fn topics(&self) -> Vec<Topic> {
        self.lock().topics.values().cloned().collect()
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            index_loaded: self.engine.is_some(),
            passages: self.engine.as_ref().map_or(0, |e| e.index.n_passages()),
            documents: self.documents.len(),
            topics: self.lock().topics.len(),
            pools: self.pools.len(),
        }
    }

    pub fn store_files(&self) -> Vec<std::path::PathBuf> {
        let state = self.lock();
        vec![
            state.turn_log.path().to_path_buf(),
            state.event_log.path().to_path_buf(),
            state.judgment_log.path().to_path_buf(),
            state.topic_log.path().to_path_buf(),
        ]
    }
}
