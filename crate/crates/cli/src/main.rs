//! `dgan`: build datasets, train, evaluate, predict and run ablation sweeps.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration or
//! validation error.

mod commands;
mod config;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Run;
use crate::config::{RunConfig, SweepAxis};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] dgan_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Run(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dgan", version, about = "Spatio-temporal demand prediction with D-GAN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for data generation, training and evaluation.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset directory written by `synth` or `ingest`.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        slots: Option<usize>,
    },
    /// Aggregate a trip-record CSV into a dataset.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trips: Option<PathBuf>,
    },
    /// Train a model; writes the loss log and checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Score a checkpoint and the baselines on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Forecast the maps following the end of the dataset.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Ablation tables over one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        axis: Option<SweepAxis>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Loads the config file, applies command-line overrides, validates, and
/// fingerprints the result.
fn prepare(common: &Common, apply: impl FnOnce(&mut RunConfig)) -> Result<Run, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    apply(&mut cfg);
    cfg.apply_seed();
    cfg.validate()?;
    let fingerprint = dgan_core::provenance::fingerprint(&cfg)?;
    log::info!("config fingerprint {fingerprint}");
    Ok(Run {
        cfg,
        fingerprint,
        out: common.out.clone(),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { common, slots } => {
            let run = prepare(&common, |c| set(&mut c.synth.slots, slots))?;
            commands::synth(&run)
        }
        Command::Ingest { common, trips } => {
            let run = prepare(&common, |c| {
                if trips.is_some() {
                    c.data.trips = trips;
                }
            })?;
            commands::ingest(&run)
        }
        Command::Train {
            common,
            data,
            epochs,
            batch_size,
            learning_rate,
        } => {
            let run = prepare(&common, |c| {
                set(&mut c.data.dataset, data.data.map(Some));
                set(&mut c.train.epochs, epochs);
                set(&mut c.train.batch_size, batch_size);
                set(&mut c.train.learning_rate, learning_rate);
            })?;
            commands::train_cmd(&run)
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            steps,
        } => {
            let run = prepare(&common, |c| {
                set(&mut c.data.dataset, data.data.map(Some));
                set(&mut c.eval.checkpoint, checkpoint.map(Some));
                set(&mut c.eval.steps, steps);
            })?;
            commands::eval(&run)
        }
        Command::Predict {
            common,
            data,
            checkpoint,
            steps,
        } => {
            let run = prepare(&common, |c| {
                set(&mut c.data.dataset, data.data.map(Some));
                set(&mut c.eval.checkpoint, checkpoint.map(Some));
                set(&mut c.predict.steps, steps);
            })?;
            commands::predict(&run)
        }
        Command::Sweep {
            common,
            data,
            axis,
            checkpoint,
            steps,
            epochs,
        } => {
            let run = prepare(&common, |c| {
                set(&mut c.data.dataset, data.data.map(Some));
                set(&mut c.sweep.axis, axis);
                set(&mut c.eval.checkpoint, checkpoint.map(Some));
                set(&mut c.sweep.steps, steps);
                set(&mut c.train.epochs, epochs);
            })?;
            commands::sweep(&run)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
