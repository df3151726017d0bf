//! `stimsqueeze`: preset tables, Monte Carlo tracking and validation for the
//! two-squeezer interferometer.

mod commands;
mod output;
mod runfile;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stimsqueeze::estimation::Objective;
use stimsqueeze::metrology::PhotonAccounting;

use crate::output::Format;

/// Exit codes.
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "stimsqueeze", version, about = "Two-squeezer interferometer simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML or JSON run file with `[interferometer]` and `[scenario]` tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Random seed (default 0, or the run file's scenario seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write gnuplot scripts next to CSV tables.
    #[arg(long, global = true)]
    pub gnuplot: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct PhiGrid {
    #[arg(long, default_value_t = 0.0)]
    pub phi_min: f64,
    #[arg(long, default_value_t = PI)]
    pub phi_max: f64,
    #[arg(long, default_value_t = 181)]
    pub phi_steps: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1b,
    Fig1c,
    Fig3,
    Fig4,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Click probabilities over a phase grid and the coincidence visibility.
    Sweep {
        #[command(flatten)]
        grid: PhiGrid,
    },
    /// Fisher information per trial and per photon over a phase grid.
    Fisher {
        #[command(flatten)]
        grid: PhiGrid,
        #[arg(long, default_value = "single-pass", value_parser = parse_accounting)]
        accounting: PhotonAccounting,
        /// Central-difference step (rad).
        #[arg(long, default_value_t = stimsqueeze::metrology::DEFAULT_STEP)]
        h: f64,
        /// Comma-separated squeezing values for a best-phase sweep.
        #[arg(long, value_delimiter = ',')]
        r_values: Option<Vec<f64>>,
    },
    /// Loss thresholds of the scheme and of NOON states.
    Thresholds {
        #[arg(long, default_value_t = 0.0)]
        nbar_min: f64,
        #[arg(long, default_value_t = 3.0)]
        nbar_max: f64,
        #[arg(long, default_value_t = 31)]
        nbar_steps: usize,
        #[arg(long, default_value_t = 20)]
        noon_max: u32,
        /// Skip the numeric threshold column.
        #[arg(long)]
        no_numeric: bool,
    },
    /// Ideal sensitivity against photon number for the scheme, SNL and NOON.
    Scaling {
        #[arg(long, default_value_t = 0.01)]
        nbar_min: f64,
        #[arg(long, default_value_t = 100.0)]
        nbar_max: f64,
        #[arg(long, default_value_t = 41)]
        nbar_steps: usize,
    },
    /// Phase estimates for windows of recorded click counts.
    Estimate {
        /// CSV with columns n00, n01, n10, n11 (extra columns are ignored).
        #[arg(long)]
        counts: PathBuf,
        /// Calibration JSON; defaults to the exact model of the config.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        branch_lo: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        branch_hi: f64,
        #[arg(long, default_value = "least-squares", value_parser = parse_objective)]
        objective: Objective,
        /// Bootstrap resamples per window (0 = Fisher bound).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
    },
    /// Monte Carlo replay of a phase-tracking schedule.
    Track {
        #[command(flatten)]
        track: TrackArgs,
    },
    /// Gaussian model against the truncated Fock oracle.
    Validate {
        #[arg(long, default_value_t = stimsqueeze::fock::ORACLE_N_MAX)]
        n_max: usize,
        #[arg(long, default_value_t = stimsqueeze::fock::ORACLE_PHASES)]
        phi_steps: usize,
    },
    /// Every table of one preset.
    Reproduce {
        #[arg(long, value_enum)]
        preset: Preset,
    },
}

#[derive(Args, Debug, Clone)]
pub struct TrackArgs {
    /// Calibration JSON to use instead of fitting a synthetic scan.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Use the exact model as calibration.
    #[arg(long, conflicts_with = "calibration")]
    pub exact_calibration: bool,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub repetition_rate: Option<f64>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value = "single-pass", value_parser = parse_accounting)]
    pub accounting: PhotonAccounting,
}

fn parse_accounting(s: &str) -> Result<PhotonAccounting, String> {
    s.parse().map_err(|e: stimsqueeze::Error| e.to_string())
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: stimsqueeze::Error| e.to_string())
}

/// Marker for a failed validation suite.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "validation failed: {}", self.0)
    }
}

impl std::error::Error for ValidationFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ValidationFailed>().is_some() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<stimsqueeze::Error>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        }
    }
    EXIT_CONFIG
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
