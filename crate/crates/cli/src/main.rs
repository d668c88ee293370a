//! `kdsta`: figure-data generator for endpoint work quasistatistics.
//!
//! Every subcommand writes CSV/JSON artifacts plus a `manifest.json` holding
//! the resolved configuration. Passing that manifest back via `--config`
//! reproduces the run byte for byte.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

pub const TOOL_NAME: &str = "kdsta";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    /// An internal invariant or accuracy check failed.
    #[error("numerical quality failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<kdsta::Error> for CliError {
    fn from(e: kdsta::Error) -> Self {
        match e {
            kdsta::Error::NumericalQuality(_) => CliError::Numerical(e.to_string()),
            kdsta::Error::InvalidParameter(_)
            | kdsta::Error::Unsupported(_)
            | kdsta::Error::TimeOutOfRange { .. }
            | kdsta::Error::NonpositiveFrequency { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "kdsta", version, about = "Endpoint work quasistatistics for shortcuts to adiabaticity")]
struct Cli {
    /// JSON config file, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the shot-noise Monte Carlo.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// RK4 steps per propagation.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Fock truncation of the oscillator oracle.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Also render SVG plots from the CSV data.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Parametric-oscillator sweep: phase heatmap, slopes, bands, Fock oracle.
    OscillatorSweep,
    /// Driven-qubit sweep: KD witnesses, χ gaps, fingerprints.
    QubitSweep,
    /// Dephasing and waveform-distortion robustness series.
    Robustness,
    /// Two-branch shot budget and a seeded Monte Carlo check.
    Shots,
    /// Fingerprint matrices of both benchmarks.
    Fingerprint,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::OscillatorSweep => "oscillator-sweep",
            Command::QubitSweep => "qubit-sweep",
            Command::Robustness => "robustness",
            Command::Shots => "shots",
            Command::Fingerprint => "fingerprint",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        steps: cli.steps,
        dim: cli.dim,
        svg: cli.svg,
    };
    let cfg = RunConfig::resolve(cli.config.as_deref(), &overrides)?;
    let artifacts = match cli.command {
        Command::OscillatorSweep => commands::oscillator_sweep(&cfg)?,
        Command::QubitSweep => commands::qubit_sweep(&cfg)?,
        Command::Robustness => commands::robustness(&cfg)?,
        Command::Shots => commands::shots(&cfg)?,
        Command::Fingerprint => commands::fingerprint(&cfg)?,
    };
    let written = artifacts.write(&cfg, cli.command.name())?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdsta: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
