//! Command-line pipeline over the `tte-estimand` library.
//!
//! Every command reads a JSON [`config::PipelineConfig`]; flags on the command
//! line override the corresponding config fields. Exit codes: 0 success,
//! 1 runtime failure, 2 configuration error, 3 invalid data.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Command;
use crate::config::{Format, PipelineConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tte", version, about = "Discrete-time time-to-event estimands with intercurrent events")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate a two-arm trial.
    Simulate(Args),
    /// Turn continuous event/censoring/ICE times into the wide layout.
    Discretize(Args),
    /// Apply a strategy plan to a dataset.
    Transform(Args),
    /// Estimate the configured estimand.
    Estimate(Args),
    /// Multiple-imputation sensitivity analysis.
    Sensitivity(Args),
    /// Check a dataset against the outcome and censoring conventions.
    Validate(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, visible_alias = "out")]
    output: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Potential-outcome oracle CSV (simulate).
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// ICE records CSV.
    #[arg(long)]
    ices: Option<PathBuf>,
}

fn resolve(args: Args) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => config::load(path)?,
        None => PipelineConfig::default(),
    };
    let overrides = [
        (&mut cfg.input, args.input),
        (&mut cfg.output, args.output),
        (&mut cfg.oracle, args.oracle),
        (&mut cfg.ices, args.ices),
    ];
    for (slot, value) in overrides {
        if value.is_some() {
            *slot = value;
        }
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.format.is_some() {
        cfg.format = args.format;
    }
    Ok(cfg)
}

/// Parse `argv` (program name first), run the command and return the exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Discretize(a) => (Command::Discretize, a),
        Sub::Transform(a) => (Command::Transform, a),
        Sub::Estimate(a) => (Command::Estimate, a),
        Sub::Sensitivity(a) => (Command::Sensitivity, a),
        Sub::Validate(a) => (Command::Validate, a),
    };
    let outcome = resolve(args).and_then(|mut cfg| commands::run(command, &mut cfg));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tte {}: {e}", command.name());
            e.exit_code()
        }
    }
}
