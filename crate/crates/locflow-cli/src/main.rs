//! Command-line driver: one subcommand per pipeline stage plus an
//! end-to-end `run`, sharing the reproducibility plumbing (config file,
//! seed, thread count, stage manifests).

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// How a failed run maps to an exit status: usage problems exit 2,
/// unusable input data exits 3, incompatible artifact schemas exit 4.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Schema(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Schema(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Schema(m) => m,
        }
    }
}

impl From<locflow::Error> for Failure {
    fn from(error: locflow::Error) -> Failure {
        if error.is_schema_error() {
            Failure::Schema(error.to_string())
        } else {
            Failure::Data(error.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "locflow",
    version,
    about = "Detects user-unintended location-sharing HTTP flows in packet captures"
)]
struct Cli {
    /// Run configuration (TOML); required by every subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the configured seed for every stochastic component
    /// (without this flag and a configured seed, 42 is used).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for intra-stage parallelism; 0 means one per core.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read the capture files and write sessionized flows.
    Sessionize,
    /// Export the per-flow feature table.
    Featurize,
    /// Train the three context voters on the ground-truth instances.
    TrainContext,
    /// Vote on instances and auto-label the flows.
    Label,
    /// Train the flow models and assemble the deployable bundle.
    TrainFlow,
    /// Classify flows with a trained bundle.
    Classify {
        /// Flow artifact to classify instead of this run's own flows.
        #[arg(long, value_name = "FILE")]
        flows: Option<PathBuf>,
    },
    /// Cross-validate the supervised model and score the one-class model.
    Evaluate,
    /// Export per-class CDF tables for one statistical feature.
    Cdf {
        /// Statistical feature to export instead of the configured one.
        #[arg(long, value_name = "NAME")]
        selector: Option<String>,
    },
    /// Run every stage in order on the configured inputs.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("locflow: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    let config_path = cli.config.ok_or_else(|| {
        Failure::Usage("a run configuration is required; pass --config <file>".into())
    })?;
    let config = RunConfig::load(&config_path, cli.seed)?;
    match cli.command {
        Command::Sessionize => stages::sessionize(&config),
        Command::Featurize => stages::featurize(&config),
        Command::TrainContext => stages::train_context(&config),
        Command::Label => stages::label(&config),
        Command::TrainFlow => stages::train_flow(&config),
        Command::Classify { flows } => stages::classify(&config, flows.as_deref()),
        Command::Evaluate => stages::evaluate(&config),
        Command::Cdf { selector } => stages::cdf(&config, selector.as_deref()),
        Command::Run => stages::run_all(&config),
    }
}
