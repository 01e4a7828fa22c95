//! Passage search over sentence-window passages: ingestion, BM25 and RM3
//! retrieval, index-time-weighted sparse reranking, rank fusion pooling and
//! graded-relevance evaluation.
//!
//! Scoring code is generic over [`Score`] (`f32` or `f64`); the aliases below
//! fix the common `f64` instantiation.

pub mod analysis;
pub mod collection;
pub mod corpus;
pub mod eval;
pub mod fusion;
pub mod index;
pub mod rerank;
pub mod retrieval;
pub mod run;
pub mod scalar;
pub mod synthetic;

pub use analysis::tokenize;
pub use collection::{QueryField, Topic, TopicStats};
pub use corpus::{CorpusStats, Document, Passage, SentenceSpan};
pub use eval::{LatencyReport, Metric, QrelSet};
pub use fusion::{Grade, Judgment, JudgmentLog, NextItem, Pool, Split, StoppingRule};
pub use index::{build_index, Index};
pub use scalar::Score;

pub type RankedList = run::RankedList<f64>;
pub type RankedListF32 = run::RankedList<f32>;
pub type RunEntry = run::RunEntry<f64>;
pub type Run = run::Run<f64>;
pub type Bm25Params = retrieval::Bm25Params<f64>;
pub type Bm25ParamsF32 = retrieval::Bm25Params<f32>;
pub type Rm3Params = retrieval::Rm3Params<f64>;
pub type WeightedQuery = retrieval::WeightedQuery<f64>;
pub type TermWeightTable = rerank::TermWeightTable<f64>;
pub type TermWeightTableF32 = rerank::TermWeightTable<f32>;
pub type RerankPipelineConfig = rerank::RerankPipelineConfig<f64>;
pub type EvalReport = eval::EvalReport<f64>;
