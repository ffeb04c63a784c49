//! `raysr`: estimate, fit, validate, sweep and serve.
//!
//! Exit status is 0 on success, 1 when an input is invalid and 2 when a file
//! cannot be read or written.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use raysr_core::{ModelVariant, ShapeKind};

#[derive(Debug, Parser)]
#[command(name = "raysr", version, about = "Predict raycast selection success rates from angular target size")]
pub struct Cli {
    /// Model document; used when a command is not given `--model`.
    #[arg(long, env = "RAYSR_MODEL", global = true, hide_env_values = true)]
    pub default_model: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Disc,
    Square,
}

impl From<Shape> for ShapeKind {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Disc => ShapeKind::Disc,
            Shape::Square => ShapeKind::Square,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Baseline,
    WithAmplitude,
    ZeroOffset,
    WorldCoordinate,
}

impl From<Variant> for ModelVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Baseline => ModelVariant::Baseline,
            Variant::WithAmplitude => ModelVariant::WithAmplitude,
            Variant::ZeroOffset => ModelVariant::ZeroOffset,
            Variant::WorldCoordinate => ModelVariant::WorldCoordinate,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Success-rate report for every target in a scene document.
    Estimate {
        scene: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Fit model constants from a trials CSV.
    Fit {
        trials: PathBuf,
        #[arg(long, value_enum, default_value = "baseline")]
        variant: Variant,
        /// Also write screening, normality and regression diagnostics.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Lilliefors-corrected p-values for the normality checks.
        #[arg(long)]
        lilliefors: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Score a model against trials: MAE, R², AIC and leave-one-condition-out CV.
    Validate {
        model: PathBuf,
        trials: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Success rate over a grid of widths.
    Sweep {
        #[arg(long, value_enum, default_value = "disc")]
        shape: Shape,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Preset to use when no model document is given.
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        /// Movement amplitude in degrees (`with_amplitude` models).
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        no_offset: bool,
        /// Add a seeded Monte Carlo cross-check with this many samples per row.
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Write synthetic trials drawn from a model (full-size design).
    Synth {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        trials_per_cell: usize,
        #[arg(long, default_value_t = 18)]
        participants: usize,
        /// Fraction of trials displaced as outliers.
        #[arg(long, default_value_t = 0.035)]
        outlier_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
