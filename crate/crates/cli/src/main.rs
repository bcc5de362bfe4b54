//! `mbfusion`: Monte-Carlo experiments and diagnostics for clustered GCI
//! fusion of multi-Bernoulli posteriors.

mod commands;
mod error;
mod instances;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser)]
#[command(name = "mbfusion", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write per-step statistics.
    Run(Common),
    /// Fuse the same inputs exhaustively and with clustering, and report the
    /// discrepancies against the truncated mass and its bound.
    CompareOracle {
        #[command(flatten)]
        common: Common,
        /// Random instances to compare when no config is given.
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Tabulate hypothesis counts and fusion times for synthetic layouts.
    BenchCounts {
        #[command(flatten)]
        common: Common,
        /// Largest number of objects per sensor.
        #[arg(long, default_value_t = 12)]
        max_objects: usize,
    },
    /// Check the truncation error bound on random instances.
    BoundCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        instances: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Gate on the GCI divergence; `inf` disables truncation.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Record wall-clock fusion times in the outputs.
    #[arg(long)]
    timings: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FUSE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "FUSE_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Run(c) => commands::run(&c),
        Command::CompareOracle { common, instances } => {
            commands::compare_oracle(&common, instances)
        }
        Command::BenchCounts {
            common,
            max_objects,
        } => commands::bench_counts(&common, max_objects),
        Command::BoundCheck { common, instances } => commands::bound_check(&common, instances),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = e.hint() {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
