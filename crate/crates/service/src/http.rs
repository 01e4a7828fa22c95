//! HTTP routes over [`Service`](crate::Service). Bodies are JSON; errors are
//! `{"error": <code>, "message": <text>}` with a matching status code.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::{InteractionEvent, InteractionKind, Service, ServiceError, TopicDraft};

type Shared = State<Arc<Service>>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::ServiceUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::UnknownTurn { .. } | ServiceError::UnknownTopic(_) | ServiceError::UnknownDocument(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::OutOfOrderJudgment { .. } | ServiceError::Exhausted | ServiceError::DuplicateTopic(_) => {
                StatusCode::CONFLICT
            }
            ServiceError::EmptyMessage
            | ServiceError::InvalidGrade(_)
            | ServiceError::NoRelevantPassage
            | ServiceError::MissingQuestion
            | ServiceError::MissingKeywordQuery
            | ServiceError::PassageNotInDocument { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Search(_) | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = serde_json::json!({ "error": self.code(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize, Serialize)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct EventRequest {
    pub turn_id: String,
    pub kind: InteractionKind,
    #[serde(default)]
    pub target_passage_id: Option<String>,
    #[serde(default)]
    pub payload: String,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct EventAck {
    pub event: InteractionEvent,
    pub log_length: usize,
}

#[derive(Debug, Deserialize)]
pub struct AssessorQuery {
    pub assessor: String,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct JudgmentRequest {
    pub passage_id: String,
    pub grade: u8,
    pub assessor: String,
}

#[derive(Debug, Deserialize)]
pub struct ExcludeQuery {
    /// Comma-separated document ids.
    #[serde(default)]
    pub exclude: String,
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/chat/{session}", get(chat_history))
        .route("/chat/{session}/message", post(chat_message))
        .route("/chat/{session}/event", post(chat_event))
        .route("/chat/{session}/events", get(chat_events))
        .route("/assess/{topic}/next", get(assess_next))
        .route("/assess/{topic}/judgment", post(assess_judgment))
        .route("/author/random-document", get(random_document))
        .route("/author/topic", post(author_topic))
        .route("/topics", get(topics))
        .route("/topics/{topic}", get(topic))
        .route("/doc/{doc_id}", get(document))
        .route("/qrels", get(qrels))
        .with_state(service)
}

async fn health(State(s): Shared) -> impl IntoResponse {
    Json(s.health())
}

async fn chat_history(State(s): Shared, Path(session): Path<String>) -> impl IntoResponse {
    Json(s.session_turns(&session))
}

async fn chat_message(
    State(s): Shared,
    Path(session): Path<String>,
    Json(req): Json<MessageRequest>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.handle_message(&session, &req.text)?))
}

async fn chat_event(
    State(s): Shared,
    Path(session): Path<String>,
    Json(req): Json<EventRequest>,
) -> Result<impl IntoResponse, ServiceError> {
    let event = InteractionEvent {
        session_id: session,
        turn_id: req.turn_id,
        kind: req.kind,
        target_passage_id: req.target_passage_id,
        payload: req.payload,
        timestamp: crate::now_ms(),
    };
    let log_length = s.record_interaction(event.clone())?;
    Ok(Json(EventAck { event, log_length }))
}

async fn chat_events(State(s): Shared, Path(session): Path<String>) -> impl IntoResponse {
    Json(s.session_events(&session))
}

async fn assess_next(
    State(s): Shared,
    Path(topic): Path<String>,
    Query(q): Query<AssessorQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.next_assessment_item(&topic, &q.assessor)?))
}

async fn assess_judgment(
    State(s): Shared,
    Path(topic): Path<String>,
    Json(req): Json<JudgmentRequest>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.submit_judgment(&topic, &req.passage_id, req.grade, &req.assessor)?))
}

async fn random_document(State(s): Shared, Query(q): Query<ExcludeQuery>) -> Result<impl IntoResponse, ServiceError> {
    let exclude: BTreeSet<String> = q
        .exclude
        .split(',')
        .map(str::trim)
        .filter(|d| !d.is_empty())
        .map(String::from)
        .collect();
    Ok(Json(s.random_document(&exclude)?))
}

async fn author_topic(State(s): Shared, Json(draft): Json<TopicDraft>) -> Result<impl IntoResponse, ServiceError> {
    Ok((StatusCode::CREATED, Json(s.submit_known_item_topic(draft)?)))
}

async fn topics(State(s): Shared) -> impl IntoResponse {
    Json(s.topics())
}

async fn topic(State(s): Shared, Path(topic): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.topic(&topic)?))
}

async fn document(State(s): Shared, Path(doc_id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.document(&doc_id)?))
}

async fn qrels(State(s): Shared) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], s.export_qrels())
}
