//! `gp-autotune`: run tuning experiments, screen datasets and re-aggregate
//! traces.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when the
//! measurement source fails beyond the retry policy, 1 for anything else.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("measurement failure: {0}")]
    Measure(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Measure(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gp-autotune",
    version,
    about = "Gaussian-process configuration tuning on discrete grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every algorithm for every replication and write traces,
    /// aggregate curves and a summary.
    Tune(CommonArgs),
    /// Time the surrogate refit and candidate selection of each iteration.
    Overhead(CommonArgs),
    /// Rank parameter subsets by merit and report signal-to-noise ratios.
    Screen(ScreenArgs),
    /// Rebuild aggregate.csv from the traces in an output directory.
    Aggregate(AggregateArgs),
}

/// Experiment flags; each overrides the matching key of `--config`.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML experiment file. Relative paths inside it resolve against its
    /// directory.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark function: branin, hartmann3, rosenbrock5 or dixon2.
    #[arg(long)]
    pub function: Option<String>,
    /// Grid sizes per dimension, e.g. `51,51`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Standard deviation of Gaussian noise added to benchmark values.
    #[arg(long)]
    pub noise: Option<f64>,
    /// CSV of measurements to replay; must cover every configuration.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// TOML space declaration; inferred from the dataset when omitted.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Measurement command, split on whitespace. Receives `name=value`
    /// arguments and prints the response on its first output line.
    #[arg(long)]
    pub command: Option<String>,
    /// Playback noise: `off`, `replicates` or a standard deviation.
    #[arg(long)]
    pub playback_noise: Option<String>,
    /// Total evaluations per run, initial design included.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Initial design size.
    #[arg(long)]
    pub init_design: Option<usize>,
    /// Relearn hyperparameters every this many evaluations.
    #[arg(long)]
    pub learn_cycle: Option<usize>,
    /// Random restarts of the hyperparameter search.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// `const:<v>` or `adaptive:<eps>,<r>`.
    #[arg(long)]
    pub kappa: Option<String>,
    /// matern, categorical or product.
    #[arg(long)]
    pub kernel: Option<String>,
    /// const or linear.
    #[arg(long)]
    pub mean: Option<String>,
    /// Comma-separated list from bo4co, sa, hill, ps, drift, random.
    #[arg(long)]
    pub algorithms: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Base seed; replication `k` uses `seed + k`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Runs executed concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// TOML space declaration; inferred from the dataset when omitted.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Largest subset size to rank; defaults to min(3, d).
    #[arg(long)]
    pub max_subset: Option<usize>,
    /// Confidence level of the SNR intervals.
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Number of ranked subsets printed.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Directory for merit.csv and snr.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Output directory of an earlier `tune` run.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GP_AUTOTUNE_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tune(args) => commands::tune(&args),
        Command::Overhead(args) => commands::overhead(&args),
        Command::Screen(args) => commands::screen(&args),
        Command::Aggregate(args) => commands::aggregate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gp-autotune: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
