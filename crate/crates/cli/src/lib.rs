//! Command-line front end: `simulate`, `twin`, `fit` and `forecast`.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mortcast", version, about = "Age-structured mortality modelling and ensemble Kalman filtering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form age profiles and peak ages of the simple model.
    Simulate(CommonArgs),
    /// Twin experiment: recover the simple model's parameters from synthetic data.
    Twin(CommonArgs),
    /// Assimilate annual overdose deaths and write one-year-ahead predictions.
    Fit(CommonArgs),
    /// Assimilate all years, then forecast the following years without updates.
    Forecast(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML file with run settings; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Observation file or directory (fit and forecast).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}
