//! The `divpref` command line: ingest, stats, train, eval, rank-divisive and
//! export-hist. [`run`] returns the process exit code: 0 on success, 1 for usage
//! errors, 2 for data errors and 3 for numerical failures.

mod commands;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{dataset_stats, StatsReport, EMBED_ENDPOINT};
pub use output::write_atomic;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<divpref::Error> for CliError {
    fn from(e: divpref::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "divpref", version, about = "Distributional reward models for multi-annotator preference data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw dataset into the normalized record format, optionally splitting it.
    Ingest(IngestArgs),
    /// Agreement statistics and category counts for a dataset.
    Stats(StatsArgs),
    /// Train a reward head and write its checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a test set.
    Eval(EvalArgs),
    /// Rank benchmark prompts by predicted divisiveness.
    RankDivisive(RankArgs),
    /// Write the chosen-vs-rejected histogram as CSV.
    ExportHist(HistArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw input file (one JSON object per line).
    #[arg(long)]
    pub data: PathBuf,
    /// Source schema: multipref or helpsteer2. Omit for the normalized record format.
    #[arg(long)]
    pub schema: Option<String>,
    /// TOML file renaming source fields.
    #[arg(long)]
    pub field_map: Option<PathBuf>,
    /// Write every record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub test_size: usize,
    #[arg(long, default_value_t = 500)]
    pub dev_size: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// bradley_terry, mse_regression, mean_variance or classification.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Correlation scale for mean-variance training; tuned over {0, 0.5, 1} on dev when omitted.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Divergence-score lambda stored with the checkpoint; tuned on dev when omitted.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// exact_normal, logistic or tanh.
    #[arg(long)]
    pub cdf: Option<String>,
    /// aggregated or all.
    #[arg(long)]
    pub label_mode: Option<String>,
    /// ngram, file:<path> or http:<url>.
    #[arg(long, default_value = "ngram")]
    pub features: String,
    /// Feature dimension (n-gram buckets, or the expected embedding size).
    #[arg(long)]
    pub dim: Option<usize>,
    /// TOML training config; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the lambda stored in the checkpoint.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = divpref::evalsuite::DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    /// product or sum.
    #[arg(long, default_value = "product")]
    pub divisiveness: String,
    /// Which response counts as chosen for reward gaps: model or majority.
    #[arg(long, default_value = "model")]
    pub orientation: String,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Benchmark file: {"prompt_id", "prompt", "responses": [{"system", "text"}]} per line.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = divpref::evalsuite::DEFAULT_TOP_FRACTION)]
    pub top_fraction: f64,
    #[arg(long, default_value = "product")]
    pub divisiveness: String,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = divpref::evalsuite::DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    #[arg(long, default_value = "model")]
    pub orientation: String,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<S: AsRef<str>>(argv: &[S]) -> i32 {
    let cli = match Cli::try_parse_from(argv.iter().map(|s| s.as_ref())) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("divpref: {e}");
            e.exit_code()
        }
    }
}
