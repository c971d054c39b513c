//! `rcs`: sampling, fitting, oracles and experiments from TOML configs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;
mod experiment;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rcs", version, about = "Refinement-based Christoffel sampling")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "rcs-out")]
    pub out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replicates for `experiment`; overrides the config.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the refinement loop and write the final weighted batch.
    Sample,
    /// Fit a target function on a stored batch.
    Fit,
    /// Run a named experiment over its size grid.
    Experiment {
        /// weighted-poly, lightning-1d, lightning-2d, fourier-surface, elm or fourier-torus-sanity.
        name: Option<String>,
    },
    /// Dense-grid Gram, k^ε on a grid, n^ε and a cap estimate.
    Oracle,
    /// Ridge leverage scores and the whack-a-mole weighting of a CSV matrix.
    Leverage,
}

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<rcs_core::Error> for Failure {
    fn from(e: rcs_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.common;
    let result = match cli.command {
        Command::Sample => commands::sample(&common),
        Command::Fit => commands::fit(&common),
        Command::Experiment { name } => experiment::run(&common, name.as_deref()),
        Command::Oracle => commands::oracle(&common),
        Command::Leverage => commands::leverage(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
