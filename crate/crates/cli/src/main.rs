//! `surveytax`: command-line front end over the surveytax library.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Taxonomy classification of survey papers with graph convolutional networks.
#[derive(Debug, Parser)]
#[command(name = "surveytax", version)]
pub struct Cli {
    /// TOML file supplying default values for any flag of the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSON Lines corpus and write it back normalized.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Per-month, per-class, per-category and keyword counts.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        /// Long-format CSV `series,key,count`.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the report as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = surveytax::corpus::DEFAULT_TOP_KEYWORDS)]
        top_k: usize,
    },
    /// Build one attributed graph and write it as a bundle directory.
    BuildGraph {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train a single model and save a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint path; metadata goes to `<FILE>.json`.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write split metrics and the loss and validation traces as JSON.
        #[arg(long, value_name = "FILE")]
        metrics: Option<PathBuf>,
        /// Also write the graph the model was trained on.
        #[arg(long, value_name = "DIR")]
        bundle: Option<PathBuf>,
    },
    /// Multi-seed experiment on one graph.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Multi-seed experiments over several category removals.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        /// One removal set per use: comma-separated categories, `none`, or
        /// `all`. Default: none, each category alone, then all.
        #[arg(long = "removal", value_name = "LIST")]
        removals: Vec<String>,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Predict every paper with a trained model and write the weak-label CSV.
    ExportWeakLabels {
        #[command(flatten)]
        source: ModelSource,
        /// Weak-label CSV; metadata goes to `<FILE>.meta.json`.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write agreement with the corpus labels as JSON (needs --data).
        #[arg(long, value_name = "FILE")]
        audit: Option<PathBuf>,
    },
    /// Write hidden-layer activations of paper nodes.
    ExportEmbeddings {
        #[command(flatten)]
        source: ModelSource,
        /// CSV `node_id,label,h0,...`.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write a two-component PCA projection `node_id,label,pc1,pc2`.
        #[arg(long, value_name = "FILE")]
        projection: Option<PathBuf>,
    },
    /// Classify papers with a chat-completion model.
    Judge {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = Switch::Off)]
        hints: Switch,
        #[arg(long, value_enum, default_value_t = TransportMode::Replay)]
        transport: TransportMode,
        /// Transcript directory: read by replay, written by live when given.
        #[arg(long, value_name = "DIR")]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value_t = surveytax::llmjudge::DEFAULT_REPETITIONS)]
        repetitions: usize,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        /// Extra attempts after a transport failure.
        #[arg(long, default_value_t = 2)]
        retries: usize,
        #[arg(long, default_value_t = 500, value_name = "MS")]
        retry_delay_ms: u64,
        /// Prompt template file replacing the built-in one.
        #[arg(long, value_name = "FILE")]
        template: Option<PathBuf>,
        /// Sampling temperature sent with live requests.
        #[arg(long, allow_negative_numbers = true)]
        temperature: Option<f64>,
        /// Run summary and transcripts as JSON.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Generate a seeded synthetic corpus whose categories carry the labels.
    Synth {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, default_value_t = 150)]
        papers: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Corpus in JSON Lines.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Taxonomy TOML; the bundled 16-class taxonomy when absent.
    #[arg(long, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    /// Named subset: jan24, nov23 or subset.
    #[arg(long)]
    pub subset: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    #[arg(long, default_value = "cocategory", value_parser = parse_kind)]
    pub graph: surveytax::graph::GraphKind,
    /// Comma-separated arXiv categories to drop from co-category edges.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub remove: Vec<String>,
    /// Co-occurrence window for text graphs.
    #[arg(long)]
    pub window: Option<usize>,
    /// Drop words rarer than this from text graphs.
    #[arg(long)]
    pub min_word_freq: Option<usize>,
    #[arg(long, value_enum)]
    pub idf: Option<Idf>,
    /// Zero removed categories in the one-hot features as well as the edges.
    #[arg(long, value_name = "BOOL")]
    pub ablate_features: Option<bool>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// Adam learning rate (default 0.02 for text graphs, 0.01 otherwise).
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub dropout: Option<f64>,
    /// best-val or final.
    #[arg(long, value_parser = parse_selection)]
    pub selection: Option<surveytax::gcn::Selection>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Inclusive range `a..b`, a single seed, or a comma list of either.
    #[arg(long, default_value = "0..4")]
    pub seeds: Seeds,
    /// Report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Results and graph statistics as Markdown tables.
    #[arg(long, value_name = "FILE")]
    pub markdown: Option<PathBuf>,
    /// One CSV row per experiment.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

/// Either a checkpoint plus its graph, or a fresh training run.
#[derive(Debug, Clone, Args)]
pub struct ModelSource {
    /// Corpus in JSON Lines; needed unless --bundle is given.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub subset: Option<String>,
    /// Graph bundle written by build-graph or train --bundle.
    #[arg(long, value_name = "DIR")]
    pub bundle: Option<PathBuf>,
    /// Use this checkpoint instead of training.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportMode {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Idf {
    Raw,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut seeds = Vec::new();
        for part in s.split(',').map(str::trim) {
            if let Some((a, b)) = part.split_once("..") {
                let parse = |v: &str| v.trim().parse::<u64>().map_err(|_| format!("bad seed {v:?} in {part:?}"));
                let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
                if a > b {
                    return Err(format!("empty seed range {part:?}"));
                }
                seeds.extend(a..=b);
            } else {
                seeds.push(part.parse().map_err(|_| format!("bad seed {part:?}"))?);
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(d) = seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(format!("seed {d} listed twice"));
        }
        Ok(Seeds(seeds))
    }
}

fn parse_kind(s: &str) -> Result<surveytax::graph::GraphKind, String> {
    s.parse().map_err(|e: surveytax::Error| e.to_string())
}

fn parse_selection(s: &str) -> Result<surveytax::gcn::Selection, String> {
    s.parse().map_err(|e: surveytax::Error| e.to_string())
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(surveytax::Error),
}

impl From<surveytax::Error> for Failure {
    fn from(e: surveytax::Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(e.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error[usage]: {m}"),
            Failure::Domain(e) => write!(f, "error[{}]: {e}", e.category()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::splice(argv) {
        Ok(a) => a,
        Err(f) => return report(f),
    };
    let cli = Cli::parse_from(argv);
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("{f}");
    match f {
        Failure::Usage(_) => ExitCode::from(2),
        Failure::Domain(_) => ExitCode::from(1),
    }
}
