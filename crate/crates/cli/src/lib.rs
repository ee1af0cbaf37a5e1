//! The `mindreader` command line.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod manifest;
pub mod report;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "mindreader", version, about = "Knowledge-graph recommendation workbench")]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory; commands write their results and a manifest there.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory (entities.csv, triples.csv, ratings.csv, popularity.csv).
    #[arg(long)]
    pub data: PathBuf,
    /// Drop degree-one entities while loading.
    #[arg(long)]
    pub prune: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Sampled negatives per test user (0 ranks against every unrated movie).
    #[arg(long, default_value_t = 99)]
    pub negatives: usize,
    /// Keep the most popular entities as test items.
    #[arg(long)]
    pub no_exclusion: bool,
    /// Train on movie ratings only instead of every binary rating.
    #[arg(long)]
    pub movies_only: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graph statistics and dataset analyses.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        /// Entities listed per sentiment.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Global PageRank of the knowledge graph.
    Pagerank {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 20)]
        top: usize,
        #[arg(long, default_value_t = 0.85)]
        damping: f64,
    },
    /// Replays the interview for every user, answering from their ratings.
    Replay {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated seeds; each gives an independent replay.
        #[arg(long, value_delimiter = ',', default_values_t = [1u64])]
        seeds: Vec<u64>,
    },
    /// Fits an embedding model on a leave-one-out training split and saves a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// MF, BPR, TransE, TransE-KG, TransH or TransH-KG.
        #[arg(long)]
        model: String,
        /// TOML file with the model table, e.g. `model = "MF"` and `dim = 16`.
        #[arg(long)]
        params: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        /// Train on every rating instead of the split's training part.
        #[arg(long)]
        full: bool,
    },
    /// Leave-one-out HR@k and NDCG@k of one model on one split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
        model: Option<String>,
        /// Checkpoint written by `train` with the same data and seed.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Runs an experiment described by a TOML config.
    Experiment {
        config: PathBuf,
        /// Overrides plan.seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Predicts descriptive-entity ratings from movie ratings by label propagation.
    Propagate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 10)]
        iters: usize,
    },
    /// Serves the interview API and the web UI.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        /// Directory for the answer log.
        #[arg(long)]
        state: PathBuf,
        /// Built UI bundle served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Writes a synthetic dataset in the dataset directory layout to `--out`.
    Generate {
        /// The small preset used by the bundled fixture.
        #[arg(long)]
        small: bool,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        movies: Option<usize>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Input("--jobs must be at least 1".into()));
        }
        // Fails only if a pool exists already, e.g. when called twice in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    commands::dispatch(cli)
}
