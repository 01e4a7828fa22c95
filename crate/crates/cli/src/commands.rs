use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use passearch_core::collection::{load_topics, split_topics, topic_stats, write_topics, CollectionError};
use passearch_core::corpus::{ingest_corpus, read_documents, read_passages, write_jsonl, CorpusError, IngestOptions};
use passearch_core::eval::{benchmark_latency, evaluate_run, paired_t_test, parse_qrels, BenchOptions, EvalError};
use passearch_core::fusion::{build_pool, FusionError, JudgmentLog, Pool};
use passearch_core::index::IndexError;
use passearch_core::rerank::{build_weight_table, load_weight_table, pipeline_search, rerank, RerankError};
use passearch_core::retrieval::{search_bm25, search_bm25_rm3, RetrievalError};
use passearch_core::run::{parse_run, write_run, RunFormatError};
use passearch_core::synthetic::{generate, SyntheticConfig};
use passearch_core::{
    build_index, Bm25Params, Index, Metric, QueryField, Rm3Params, RerankPipelineConfig, Run, TermWeightTable, Topic,
};
use passearch_service::{Service, ServiceError};
use thiserror::Error;

use crate::{Command, Field, IndexCommand, Model, Pipeline, PoolCommand, TopicsCommand, WeightsCommand};

const BUILTIN_WEIGHTS: &str = "builtin";
const POOLS_FILE: &str = "pools.jsonl";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Collection(#[from] CollectionError),
    #[error(transparent)]
    RunFormat(#[from] RunFormatError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Invalid(String),
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn query_field(field: Field) -> QueryField {
    match field {
        Field::Question => QueryField::Question,
        Field::Query => QueryField::Query,
    }
}

fn read_topics(path: &Path) -> Result<Vec<Topic>, CliError> {
    Ok(load_topics(open(path)?)?)
}

fn read_run(path: &Path) -> Result<Run, CliError> {
    Ok(parse_run(open(path)?)?)
}

fn weight_table(spec: &str, index: &Index) -> Result<TermWeightTable, CliError> {
    if spec == BUILTIN_WEIGHTS {
        Ok(build_weight_table(index))
    } else {
        Ok(load_weight_table(Path::new(spec), index)?)
    }
}

fn read_pools<R: BufRead>(input: R) -> Result<Vec<Pool>, CliError> {
    let mut pools = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pool = serde_json::from_str(&line).map_err(|e| CliError::Invalid(format!("pools line {}: {e}", i + 1)))?;
        pools.push(pool);
    }
    Ok(pools)
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { input, output, window, strict } => {
            let out = ingest_corpus(open(&input)?, IngestOptions { window, strict })?;
            let mut w = create(&output)?;
            write_jsonl(&mut w, &out.passages)?;
            w.flush()?;
            for e in &out.skipped {
                eprintln!("skipped: {e}");
            }
            println!(
                "documents {}  passages {}  sentences {}  passages/doc {:.2}  skipped {}",
                out.stats.n_documents,
                out.stats.n_passages,
                out.stats.n_sentences,
                out.stats.mean_passages_per_doc,
                out.skipped.len()
            );
        }
        Command::Index(IndexCommand::Build { passages, out }) => {
            let passages = read_passages(open(&passages)?)?;
            let index = build_index(&passages)?;
            index.save(&out)?;
            println!("indexed {} passages, {} terms", index.n_passages(), index.n_terms());
        }
        Command::Index(IndexCommand::Stats { index }) => {
            let index = Index::load(&index)?;
            println!("passages      {}", index.n_passages());
            println!("terms         {}", index.n_terms());
            println!("total_length  {}", index.total_length());
            println!("avg_length    {:.4}", index.avg_length());
        }
        Command::Search { index, topics, field, model, k, run_tag, out } => {
            let index = Index::load(&index)?;
            let bm25 = Bm25Params::default();
            let mut run = Run::new();
            for topic in read_topics(&topics)? {
                let query = topic.query_text(query_field(field));
                let mut list = match model {
                    Model::Bm25 => search_bm25(query, k, &index, &bm25)?,
                    Model::Bm25rm3 => search_bm25_rm3(query, k, &index, &bm25, &Rm3Params::default())?,
                };
                list.query_id = topic.topic_id.clone();
                if let Some(tag) = &run_tag {
                    list.run_tag = tag.clone();
                }
                run.insert(topic.topic_id, list);
            }
            let mut w = create(&out)?;
            write_run(&mut w, &run)?;
            w.flush()?;
        }
        Command::Weights(WeightsCommand::Build { index, out }) => {
            let index = Index::load(&index)?;
            let table: TermWeightTable = build_weight_table(&index);
            table.save(&out)?;
            println!("{} passages weighted", table.len());
        }
        Command::Rerank { index, weights, run, topics, field, out } => {
            let index = Index::load(&index)?;
            let table = weight_table(&weights, &index)?;
            let topics: BTreeMap<String, Topic> =
                read_topics(&topics)?.into_iter().map(|t| (t.topic_id.clone(), t)).collect();
            let mut reranked = Run::new();
            for (topic_id, list) in read_run(&run)? {
                let topic = topics
                    .get(&topic_id)
                    .ok_or_else(|| CliError::Invalid(format!("run topic `{topic_id}` is not in the topic file")))?;
                reranked.insert(topic_id, rerank(topic.query_text(query_field(field)), &list, &table)?);
            }
            let mut w = create(&out)?;
            write_run(&mut w, &reranked)?;
            w.flush()?;
        }
        Command::Pool(PoolCommand::Build { runs, topics, out }) => {
            let runs = runs.iter().map(|p| read_run(p)).collect::<Result<Vec<_>, _>>()?;
            std::fs::create_dir_all(&out)?;
            let mut w = create(&out.join(POOLS_FILE))?;
            for topic in read_topics(&topics)? {
                let lists: Vec<_> = runs.iter().filter_map(|r| r.get(&topic.topic_id).cloned()).collect();
                if lists.is_empty() {
                    eprintln!("no run covers topic {}; skipped", topic.topic_id);
                    continue;
                }
                let pool = build_pool(&topic.topic_id, &lists, topic.split)?;
                serde_json::to_writer(&mut w, &pool).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        Command::Pool(PoolCommand::ExportQrels { judgments, out }) => {
            let log = JudgmentLog::read_jsonl(open(&judgments)?)?;
            let mut w = create(&out)?;
            log.write_qrels(&mut w)?;
            w.flush()?;
        }
        Command::Eval { run, qrels, metrics, threshold, per_topic, out } => {
            let metrics = Metric::parse_list(&metrics)?;
            let qrels = parse_qrels(open(&qrels)?)?;
            let report = evaluate_run(&read_run(&run)?, &qrels, &metrics, threshold);
            print!("{}", report.to_table(per_topic));
            if let Some(path) = out {
                let mut w = create(&path)?;
                w.write_all(report.to_jsonl().as_bytes())?;
                w.flush()?;
            }
        }
        Command::Sigtest { run_a, run_b, qrels, metric, threshold } => {
            let metric: Metric = metric.parse()?;
            let qrels = parse_qrels(open(&qrels)?)?;
            let a = evaluate_run(&read_run(&run_a)?, &qrels, &[metric], threshold).topic_values(metric);
            let b = evaluate_run(&read_run(&run_b)?, &qrels, &[metric], threshold).topic_values(metric);
            let (xs, ys): (Vec<f64>, Vec<f64>) = a
                .iter()
                .filter_map(|(topic, x)| b.get(topic).map(|y| (*x, *y)))
                .unzip();
            let test = paired_t_test(&xs, &ys)?;
            let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
            println!("metric  {metric}");
            println!("n       {}", test.n);
            println!("mean_a  {:.4}", mean(&xs));
            println!("mean_b  {:.4}", mean(&ys));
            match test.t {
                Some(t) => println!("t       {t:.4}"),
                None => println!("t       undefined"),
            }
            println!("p       {:.4}", test.p);
        }
        Command::Bench { index, topics, pipeline, field, weights, k, warmup, repeats, out } => {
            let index = Index::load(&index)?;
            let queries: Vec<String> = read_topics(&topics)?
                .iter()
                .map(|t| t.query_text(query_field(field)).to_string())
                .collect();
            let opts = BenchOptions { warmup, repeats };
            let bm25 = Bm25Params::default();
            let report = match pipeline {
                Pipeline::Bm25 => benchmark_latency("bm25", |q| search_bm25(q, k, &index, &bm25), &queries, opts)?,
                Pipeline::Bm25rm3 => benchmark_latency(
                    "bm25rm3",
                    |q| search_bm25_rm3(q, k, &index, &bm25, &Rm3Params::default()),
                    &queries,
                    opts,
                )?,
                Pipeline::Tilde => {
                    let table = weight_table(weights.as_deref().unwrap_or(BUILTIN_WEIGHTS), &index)?;
                    let cfg = RerankPipelineConfig {
                        first_stage_depth: k,
                        ..Default::default()
                    };
                    benchmark_latency("bm25+rerank", |q| pipeline_search(q, &index, &table, &cfg), &queries, opts)?
                }
            };
            println!(
                "{:<14} {:>10} {:>10} {:>10} {:>8}",
                "system", "mean_ms", "median_ms", "p95_ms", "queries"
            );
            println!(
                "{:<14} {:>10.3} {:>10.3} {:>10.3} {:>8}",
                report.system, report.mean_ms, report.median_ms, report.p95_ms, report.n_queries
            );
            let mut w = create(&out)?;
            serde_json::to_writer(&mut w, &report).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Command::Topics(TopicsCommand::Validate { file }) => {
            let topics = read_topics(&file)?;
            println!("{} topics valid", topics.len());
        }
        Command::Topics(TopicsCommand::Stats { file }) => {
            let s = topic_stats(&read_topics(&file)?)?;
            println!("topics               {}", s.n_topics);
            println!("queries_per_topic    {:.2} (sd {:.2})", s.mean_queries_per_topic, s.sd_queries_per_topic);
            println!("question_len_words   {:.2}", s.mean_question_len_words);
            println!("query_len_words      {:.2}", s.mean_query_len_words);
        }
        Command::Topics(TopicsCommand::Split { file, qrels, n_test, out }) => {
            let topics = read_topics(&file)?;
            let qrels = parse_qrels(open(&qrels)?)?;
            let (train, test) = split_topics(&topics, &qrels, n_test)?;
            let mut relabelled: BTreeMap<&str, &Topic> = BTreeMap::new();
            for t in train.iter().chain(&test) {
                relabelled.insert(&t.topic_id, t);
            }
            let ordered: Vec<Topic> = topics.iter().map(|t| relabelled[t.topic_id.as_str()].clone()).collect();
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    write_topics(&mut w, &ordered)?;
                    w.flush()?;
                    eprintln!("train {}  test {}", train.len(), test.len());
                }
                None => write_topics(&mut std::io::stdout().lock(), &ordered)?,
            }
        }
        Command::Synth { out, seed, documents, topics } => {
            let collection = generate(&SyntheticConfig {
                seed,
                n_documents: documents,
                n_topics: topics,
                n_test: topics / 2,
                ..Default::default()
            });
            collection.write_to(&out)?;
            println!(
                "wrote {} documents, {} topics to {}",
                collection.documents.len(),
                collection.topics.len(),
                out.display()
            );
        }
        Command::Serve { index, weights, corpus, port, store, pools, topics, seed, host } => {
            let index = Index::load(&index)?;
            let table = weight_table(&weights, &index)?;
            let documents = read_documents(open(&corpus)?)?;
            let mut service = Service::open(&store, seed)?
                .with_engine(index, table)
                .with_documents(documents);
            if let Some(p) = pools {
                service = service.with_pools(read_pools(open(&p)?)?);
            }
            if let Some(t) = topics {
                service = service.with_topics(read_topics(&t)?)?;
            }
            let app = passearch_service::router(Arc::new(service));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                println!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, app).await
            })?;
        }
    }
    Ok(())
}
