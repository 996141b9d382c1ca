//! Command-line experiment harness for `npvi-core`.
//!
//! Four subcommands are provided: `fit`, `compare`, `synth-data` and
//! `density-grid`. All outputs are written atomically under the output
//! directory. Exit codes: 0 success, 2 configuration error, 3 numerical
//! failure.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] npvi_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_config() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "npvi", version, about = "Nonparametric variational inference experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one engine to one model.
    Fit(RunArgs),
    /// Fit several engines on a shared train/test split and score them.
    Compare(RunArgs),
    /// Generate a synthetic dataset.
    SynthData(RunArgs),
    /// Evaluate a fitted two-dimensional mixture on a grid.
    DensityGrid(GridArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's `data`.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Mixture JSON written by `fit`.
    #[arg(long)]
    pub approx: PathBuf,
    /// `lo,hi` for both axes or `xlo,xhi,ylo,yhi`.
    #[arg(long, default_value = "-5,5", allow_hyphen_values = true)]
    pub bounds: String,
    /// Points per axis (at least 16).
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => commands::cmd_fit(&a),
        Command::Compare(a) => commands::cmd_compare(&a),
        Command::SynthData(a) => commands::cmd_synth_data(&a),
        Command::DensityGrid(a) => commands::cmd_density_grid(&a),
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
