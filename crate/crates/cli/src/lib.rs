//! Command-line front end: parameter files in, reports and CSV tables out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use optosteer::statespace::Flavor;

pub mod commands;
pub mod paramfile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parameter file line {line}: {msg}")]
    Param { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid option: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] optosteer::Error),
}

/// Exit status for failed self-checks, distinct from errors (1) and usage
/// errors (2).
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "optosteer", version, about = "Conditional states and steerability of a monitored optomechanical oscillator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional covariance V_s and steerability S.
    Steer {
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form S and S_v along Ω_x/Ω_F at fixed Ω_q.
    Sweep {
        paramfile: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        from: f64,
        #[arg(long, default_value_t = 1000.0)]
        to: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Spacing::Log)]
        spacing: Spacing,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Displacement-referred noise spectra and the SQL.
    Spectra {
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long, default_value_t = 0.01)]
        from: f64,
        #[arg(long, default_value_t = 100.0)]
        to: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal homodyne angle schedule for quadrature φ.
    Schedule {
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo check of the conditional covariance under the optimal
    /// schedule for φ.
    Simulate {
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        grid: GridOpts,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail unless the deviation stays below `tolerance` and every
        /// residual/outcome correlation below 4/√count.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        /// Also write the first simulated record.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrodicted tomography error V_v, duality with V_s, and S_v.
    Tomo {
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        grid: GridOpts,
        /// Prior inflation for the flat-prior limit.
        #[arg(long, default_value_t = 1e6)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Lin,
    Log,
}

#[derive(Debug, Clone, Args)]
pub struct ModelOpts {
    /// `key = value` parameter file.
    pub paramfile: PathBuf,
    #[arg(long, default_value = "adiabatic")]
    pub flavor: Flavor,
    /// Override the detection efficiency.
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct GridOpts {
    /// Window length; defaults to the file's `window` or 12 / slowest filter rate.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 3000)]
    pub samples: usize,
}

/// Result of one command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub report: String,
    pub csv: String,
    /// The CSV is the primary product: printed to stdout when no `--out` is
    /// given, with the report moved to stderr.
    pub table: bool,
    pub warnings: Vec<String>,
    pub failed_checks: Vec<String>,
}

impl Command {
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Steer { out, .. }
            | Command::Sweep { out, .. }
            | Command::Spectra { out, .. }
            | Command::Schedule { out, .. }
            | Command::Simulate { out, .. }
            | Command::Tomo { out, .. } => out.as_ref(),
        }
    }
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    use commands::*;
    match &cli.command {
        Command::Steer { model, grid, .. } => steer(model, grid),
        Command::Sweep {
            paramfile,
            from,
            to,
            points,
            spacing,
            ..
        } => sweep(paramfile, *from, *to, *points, *spacing),
        Command::Spectra {
            model, from, to, points, ..
        } => spectra(model, *from, *to, *points),
        Command::Schedule { model, grid, phi, .. } => schedule(model, grid, *phi),
        Command::Simulate {
            model,
            grid,
            phi,
            count,
            seed,
            check,
            tolerance,
            record,
            ..
        } => simulate(
            model,
            grid,
            &SimulateOpts {
                phi: *phi,
                count: *count,
                seed: *seed,
                check: *check,
                tolerance: *tolerance,
                record: record.clone(),
            },
        ),
        Command::Tomo { model, grid, scale, .. } => tomo(model, grid, *scale),
    }
}

/// Scientific notation with 9 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.8e}")
}
