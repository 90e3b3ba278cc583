use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conformal::batch::Sidedness;
use conformal::betting::StrategyConfig;
use conformal::changedetect::Procedure;
use conformal::datasets::Generator;

#[derive(Debug, Parser)]
#[command(name = "conformal", version, about = "Conformal martingales for testing exchangeability")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a conformal martingale over a stream.
    Martingale(MartingaleArgs),
    /// Run a conformal martingale and a change detector over a stream.
    Detect(DetectArgs),
    /// Apply a batch randomness test to nonconformity scores.
    Batch(BatchArgs),
    /// Exact upper-probability oracles for short binary sequences.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Whitespace-separated: a digit label followed by 256 pixel values.
    Usps,
    /// UCI absenteeism table; features Age, Education, Son.
    Absenteeism,
    /// Absenteeism with the social drinker and smoker flags added.
    AbsenteeismExtended,
    /// One real number per line.
    Values,
    /// Generated stream; see `--generator`.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ncm {
    KnnRatio,
    KnnDiff,
    Identity,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceKind {
    Euclidean,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    /// Input file; not used with `--format synthetic`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "values")]
    pub format: Format,
    /// Shuffle the stream with this seed before processing.
    #[arg(long)]
    pub permute_seed: Option<u64>,
    /// Synthetic generator before the change point, e.g. `bernoulli:0.5`,
    /// `uniform:0,1`, `gaussian:0,1`, `labeled:dim,label_p,separation,sd`.
    #[arg(long, default_value = "uniform:0,1")]
    pub generator: Generator,
    /// Synthetic generator from the change point on; defaults to `--generator`.
    #[arg(long)]
    pub post_generator: Option<Generator>,
    /// Index of the first post-change observation (0: the whole stream).
    #[arg(long)]
    pub change_point: Option<usize>,
    /// Length of a synthetic stream.
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MartingaleArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[arg(long, value_enum, default_value = "knn-ratio")]
    pub ncm: Ncm,
    #[arg(long, value_enum, default_value = "euclidean")]
    pub distance: DistanceKind,
    /// `power:κ`, `mixture:m` or `histogram:B,C`.
    #[arg(long, default_value = "histogram:10,10")]
    pub strategy: StrategyConfig,
    /// Seed for tie-breaking and synthetic data.
    #[arg(long, env = "CONFORMAL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write one JSON record per step to this file (`-` for standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the `n,log10_S` trajectory as CSV to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Repeat the run with this many derived seeds and report summaries only.
    #[arg(long)]
    pub monte_carlo: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub run: MartingaleArgs,
    #[arg(long, default_value = "sr", value_parser = parse_procedure)]
    pub procedure: Procedure,
    /// Alarm threshold; must exceed 1.
    #[arg(long)]
    pub threshold: f64,
}

fn parse_procedure(s: &str) -> Result<Procedure, String> {
    s.parse().map_err(|e: conformal::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BatchTest {
    Bartels,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[arg(long, value_enum, default_value = "knn-ratio")]
    pub ncm: Ncm,
    #[arg(long, value_enum, default_value = "euclidean")]
    pub distance: DistanceKind,
    #[arg(long, value_enum, default_value = "bartels")]
    pub test: BatchTest,
    #[arg(long, default_value = "two_sided", value_parser = parse_sidedness)]
    pub sided: Sidedness,
    #[arg(long, env = "CONFORMAL_SEED", default_value_t = 0)]
    pub seed: u64,
}

fn parse_sidedness(s: &str) -> Result<Sidedness, String> {
    s.parse().map_err(|e: conformal::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleOp {
    Uiid,
    Uep,
    Ucp,
    Prop1,
    Prop2,
    Stirling,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub op: OracleOp,
    /// Horizon for the sweeps, or the largest N for `stirling`.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Event file: `{"N": int, "members": ["0101", ...]}`.
    #[arg(long)]
    pub event: Option<PathBuf>,
    /// Random events per sweep.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Tie-breaking sequences per target in the `prop2` sweep.
    #[arg(long, default_value_t = 100)]
    pub theta_runs: usize,
    #[arg(long, env = "CONFORMAL_SEED", default_value_t = 0)]
    pub seed: u64,
}
