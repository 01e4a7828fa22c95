#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use passearch_core::corpus::{make_passages, Passage, DEFAULT_WINDOW};
use passearch_core::fusion::{Pool, Split};
use passearch_core::rerank::build_weight_table;
use passearch_core::synthetic::{generate, SyntheticCollection, SyntheticConfig};
use passearch_core::{build_index, Document, Index};
use passearch_service::Service;
use serde_json::Value;
use tower::ServiceExt;

pub const SEED: u64 = 7;

pub struct Fixture {
    pub collection: SyntheticCollection,
    pub passages: Vec<Passage>,
    pub index: Index,
}

impl Fixture {
    pub fn new(n_documents: usize, n_topics: usize) -> Self {
        let collection = generate(&SyntheticConfig {
            n_documents,
            n_topics,
            n_test: n_topics / 2,
            ..Default::default()
        });
        let passages = passages_of(&collection.documents);
        let index = build_index(&passages).unwrap();
        Self { collection, passages, index }
    }

    /// One train pool and one test pool, both over the first 120 passages.
    pub fn pools(&self) -> Vec<Pool> {
        let queue: Vec<String> = self.passages.iter().take(120).map(|p| p.passage_id.clone()).collect();
        assert_eq!(queue.len(), 120, "fixture corpus too small");
        let topics = &self.collection.topics;
        vec![
            Pool { topic_id: topics[0].topic_id.clone(), queue: queue.clone(), split: Split::Train },
            Pool { topic_id: topics[1].topic_id.clone(), queue, split: Split::Test },
        ]
    }

    pub fn service(&self, store: &Path) -> Service {
        Service::open(store, SEED)
            .unwrap()
            .with_engine(self.index.clone(), build_weight_table(&self.index))
            .with_documents(self.collection.documents.clone())
            .with_pools(self.pools())
            .with_topics(self.collection.topics.clone())
            .unwrap()
    }
}

pub fn passages_of(documents: &[Document]) -> Vec<Passage> {
    documents
        .iter()
        .flat_map(|d| make_passages(d, DEFAULT_WINDOW).unwrap())
        .collect()
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

pub fn app(service: Service) -> Router {
    passearch_service::router(Arc::new(service))
}
