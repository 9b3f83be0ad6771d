//! `windebm`: train, evaluate, explain and benchmark glass-box wind power
//! forecasters from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "windebm", version, about = "Glass-box wind power forecasting")]
struct Cli {
    /// Run configuration file (`[section]` headers, `key = value` lines).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key; repeatable, wins over the file. Give all
    /// overrides on one side of the subcommand name.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train `model.kind` and write the model file plus a training log.
    Train {
        /// Model file path (default `<run.output_dir>/model.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model file on a split of the configured data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
    /// Write forecasts for a split of the configured data.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
        /// Output CSV (default `<run.output_dir>/predictions.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate `run.models` over `features.horizons`.
    Benchmark,
    /// Interpret a trained model.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[command(subcommand)]
        mode: ExplainMode,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExplainMode {
    /// Mean absolute contribution of every term.
    Global {
        #[arg(long, value_enum, default_value = "train")]
        split: SplitChoice,
    },
    /// Breakdown of one forecast.
    Local {
        /// Row index within the split.
        #[arg(long)]
        row: usize,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
    /// Shape function of one feature.
    Shape {
        #[arg(long)]
        feature: String,
    },
    /// Interaction surface of a feature pair.
    Heatmap {
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        pair: Vec<String>,
    },
    /// Partial dependence of one feature at the model's bin centers.
    Pdp {
        #[arg(long)]
        feature: String,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
    /// Permutation feature importance.
    Pfi {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
    /// Pearson correlations between features and target on training rows.
    Correlations,
}

/// Process exit codes.
pub mod exit {
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DATA: u8 = 3;
    pub const MODEL: u8 = 4;
}

/// Marks an error with the exit code it should produce.
#[derive(Debug)]
pub struct Classified {
    pub code: u8,
    pub source: anyhow::Error,
}

impl std::fmt::Display for Classified {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl std::error::Error for Classified {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use windebm_core::Error as E;
    if let Some(c) = err.downcast_ref::<Classified>() {
        return c.code;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return exit::USAGE;
    }
    match err.downcast_ref::<E>() {
        Some(E::InvalidParameter(_) | E::UnknownFeature { .. } | E::UnknownTerm(_) | E::PersistenceUndefined) => {
            exit::USAGE
        }
        Some(
            E::Csv(_)
            | E::MissingColumn(_)
            | E::InvalidTimestamp { .. }
            | E::InvalidNumber { .. }
            | E::NonMonotoneTimestamps { .. }
            | E::Empty(_)
            | E::InsufficientLength { .. }
            | E::NoExogenousColumns
            | E::LengthMismatch { .. }
            | E::ConstantInput(_)
            | E::ZeroVariance,
        ) => exit::DATA,
        Some(
            E::CorruptModel(_)
            | E::UnsupportedVersion { .. }
            | E::ChecksumMismatch
            | E::DimensionMismatch { .. }
            | E::DisallowedFeature(_),
        ) => exit::MODEL,
        _ => exit::FAILURE,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    for assignment in &cli.overrides {
        settings.set(assignment)?;
    }
    RunConfig::from_settings(&settings)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Train { out } => commands::train(&config, out),
        Command::Evaluate { model, split } => commands::evaluate(&config, &model, split),
        Command::Predict { model, split, out } => commands::predict(&config, &model, split, out),
        Command::Benchmark => commands::benchmark(&config),
        Command::Explain { model, mode } => commands::explain(&config, &model, mode),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
