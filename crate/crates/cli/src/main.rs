mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reviewmine::analytics::Platform;
use tracing_subscriber::EnvFilter;

use crate::commands::{Failure, Summary};
use crate::config::PipelineConfig;

/// Mines game store reviews into per-element ratings, correlations and a
/// boosted-tree rating model.
///
/// Every command prints one JSON line on stdout and logs to stderr.
/// Exit status: 0 success, 1 fatal, 2 finished with diagnostics.
#[derive(Debug, Parser)]
#[command(name = "reviewmine", version)]
pub struct Cli {
    /// TOML pipeline config. Relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Debug-level logs.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw store metadata, filter eligible games and write the tokenized metadata CSV.
    Ingest(IngestArgs),
    /// Turn each game's top reviews into numeric records with a language model.
    Quantify(QuantifyArgs),
    /// Average quantified reviews per game and merge with the metadata.
    Aggregate(AggregateArgs),
    /// Correlations, platform comparison and genre tables.
    Analyze(AnalyzeArgs),
    /// Fit the rating model on the merged dataset.
    Train(TrainArgs),
    /// Predict overall ratings for every game in a merged dataset.
    Predict(PredictArgs),
    /// Mean predicted rating per genre.
    GenreInfluence(GenreInfluenceArgs),
    /// Collect the analysis outputs into summary.md.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Quantify(_) => "quantify",
            Command::Aggregate(_) => "aggregate",
            Command::Analyze(_) => "analyze",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::GenreInfluence(_) => "genre-influence",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Steam dump (JSON object keyed by AppID).
    #[arg(long)]
    pub steam: Option<PathBuf>,
    /// Meta dump (JSON array).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Metadata CSV to write; the exclusion report and summary go beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub min_reviews: Option<u64>,
    #[arg(long)]
    pub min_year: Option<i32>,
    /// Download missing Steam review files into the reviews directory.
    #[arg(long)]
    pub fetch_reviews: bool,
    #[arg(long)]
    pub reviews_dir: Option<PathBuf>,
    #[arg(long)]
    pub steam_base_url: Option<String>,
}

#[derive(Debug, Args)]
pub struct QuantifyArgs {
    /// Answer prompts from a script instead of calling an endpoint.
    #[arg(long, value_name = "SCRIPT")]
    pub mock_llm: Option<PathBuf>,
    #[arg(long, env = "QUANT_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, env = "QUANT_MODEL")]
    pub model: Option<String>,
    #[arg(long, env = "QUANT_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Tokenized metadata CSV listing the games to quantify.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub reviews_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub quantified: Option<PathBuf>,
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlatformArg {
    Pc,
    Vr,
    Both,
}

impl PlatformArg {
    pub fn platforms(self) -> Vec<Platform> {
        match self {
            PlatformArg::Pc => vec![Platform::Pc],
            PlatformArg::Vr => vec![Platform::Vr],
            PlatformArg::Both => Platform::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Merged dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub platform: PlatformArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Where to save the model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenreInfluenceArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub platform: PlatformArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding report.json and the genre influence tables.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Markdown file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging(verbose: bool) {
    let filter = EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| EnvFilter::new(if verbose { "debug" } else { "info" }));
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let name = cli.command.name();
    let result = PipelineConfig::load(cli.config.as_deref())
        .and_then(|cfg| cfg.validate().map(|()| cfg))
        .map_err(|m| Failure::new("Config", m))
        .and_then(|cfg| commands::run(cli.command, cfg));
    let (summary, code) = match result {
        Ok(s) => {
            let code = if s.diagnostics { 2 } else { 0 };
            (s, code)
        }
        Err(f) => {
            tracing::error!(kind = f.kind, "{}", f.message);
            (Summary::failed(&f), 1)
        }
    };
    println!("{}", summary.to_line(name));
    ExitCode::from(code)
}
