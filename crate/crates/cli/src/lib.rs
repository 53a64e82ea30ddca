//! Command-line front end for the ringsource toolkit.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or missing configuration; nothing was computed.
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<ringsource::Error> for CliError {
    fn from(e: ringsource::Error) -> Self {
        match e {
            ringsource::Error::Config(_) | ringsource::Error::Precondition(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ringsource", version, about = "Microring photon-pair source modelling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; its sections override the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in device: symmetric, fig4-family, table1-dmzr.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the coincidence simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the report on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Through and drop spectra for input and add excitation.
    Spectrum,
    /// Coincidence-ratio theory curve and device figures of merit.
    Figures,
    /// Simulated coincidence histograms and the ratio estimate.
    Coinc,
    /// Heater sweep and refinement with before/after spectra.
    Tune,
}

/// Parse the configuration, run the command and return the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let preset = cli.preset.as_deref().map(config::Preset::parse).transpose()?;
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let mut resolved = config::resolve(file, preset)?;
    if let Some(seed) = cli.seed {
        resolved.coinc.rng_seed = seed;
    }
    let pool = match cli.threads {
        Some(0) => return Err(CliError::Config("--threads: must be at least 1".into())),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?,
        ),
        None => None,
    };
    let mut out = output::Output::new(&cli.out, cli.quiet)?;
    let job = |out: &mut output::Output| commands::dispatch(cli.command, &resolved, out);
    match pool {
        Some(pool) => pool.install(|| job(&mut out))?,
        None => job(&mut out)?,
    }
    Ok(out.written().to_vec())
}
