mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "passearch", version, about = "Passage search: ingest, index, retrieve, rerank, pool, evaluate, serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a document JSONL file into sentence-window passages.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        window: usize,
        /// Fail on the first malformed record instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    #[command(subcommand)]
    Index(IndexCommand),
    /// Retrieve a run for every topic.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, value_enum, default_value_t = Field::Question)]
        field: Field,
        #[arg(long, value_enum, default_value_t = Model::Bm25)]
        model: Model,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long)]
        run_tag: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Weights(WeightsCommand),
    /// Rerank an existing run with a term weight table.
    Rerank {
        #[arg(long)]
        index: PathBuf,
        /// A weight file, or `builtin` for the lexical table.
        #[arg(long)]
        weights: String,
        #[arg(long)]
        run: PathBuf,
        /// Topics supplying the query text for each run topic.
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, value_enum, default_value_t = Field::Question)]
        field: Field,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Pool(PoolCommand),
    /// Score a run against qrels.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value = "ndcg@5,rr,success@3,success@100")]
        metrics: String,
        #[arg(long, default_value_t = 1)]
        threshold: u8,
        #[arg(long)]
        per_topic: bool,
        /// Also write per-topic and mean values as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired t-test between two runs on one metric.
    Sigtest {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value = "ndcg@5")]
        metric: String,
        #[arg(long, default_value_t = 1)]
        threshold: u8,
    },
    /// Per-query latency of a retrieval pipeline.
    Bench {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, value_enum)]
        pipeline: Pipeline,
        #[arg(long, value_enum, default_value_t = Field::Question)]
        field: Field,
        /// Weight file for the `tilde` pipeline; the lexical table when omitted.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Write the bundled synthetic collection (corpus, topics, qrels).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = passearch_core::synthetic::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        documents: usize,
        #[arg(long, default_value_t = 50)]
        topics: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        index: PathBuf,
        /// A weight file, or `builtin` for the lexical table.
        #[arg(long)]
        weights: String,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        store: PathBuf,
        /// Pools written by `pool build`, for the assessment endpoints.
        #[arg(long)]
        pools: Option<PathBuf>,
        #[arg(long)]
        topics: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    Build {
        #[arg(long)]
        passages: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Stats {
        #[arg(long)]
        index: PathBuf,
    },
}

#[derive(Subcommand)]
enum WeightsCommand {
    /// Write the built-in lexical weight table.
    Build {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PoolCommand {
    /// Fuse runs per topic into judging queues (`pools.jsonl` in `--out`).
    Build {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    ExportQrels {
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TopicsCommand {
    Validate {
        file: PathBuf,
    },
    Stats {
        file: PathBuf,
    },
    /// Mark the most-judged topics as test and the rest as train.
    Split {
        file: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value_t = 50)]
        n_test: usize,
        /// Where to write the relabelled topics; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Question,
    Query,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Bm25,
    Bm25rm3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pipeline {
    Bm25,
    Bm25rm3,
    Tilde,
}

fn main() -> ExitCode {
    match commands::run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
