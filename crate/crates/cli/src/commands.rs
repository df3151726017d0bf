//! Sub-command implementations.

use std::fs::File;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use stimsqueeze::detection::{fringe_visibility, model_visibility};
use stimsqueeze::estimation::{bootstrap_sigma_in_stream, calibrate, estimate_counts, Branch, CalibrationModel, Objective};
use stimsqueeze::fock::{oracle_case, ORACLE_ETA_VALUES, ORACLE_R_VALUES, ORACLE_TOLERANCE};
use stimsqueeze::metrology::{
    best_report, fisher_sweep, ideal_scaling, squeezing_sweep, threshold_table, NoonBaseline, PhotonAccounting,
    DEFAULT_STEP,
};
use stimsqueeze::simkit::{
    run_tracking, sensitivity_report, synthetic_calibration_samples, write_records_csv, TrackingSummary,
};
use stimsqueeze::{click_model, Error, InterferometerConfig, TrackingScenario};

use crate::output::{Curve, Format, Output};
use crate::runfile::RunFile;
use crate::{Cli, Command, Common, PhiGrid, Preset, TrackArgs, ValidationFailed};

/// Fringe scan used to fit the tracking calibration.
const CALIBRATION_POINTS: usize = 37;
const CALIBRATION_TRIALS: u64 = 10_000_000;
/// Bootstrap resamples per window in the tracking preset.
const PRESET_BOOTSTRAP: usize = 100;
/// Projection settings: improved overlap and stronger squeezing.
const PROJECTION_R: f64 = 1.5;
const PROJECTION_OVERLAP: f64 = 0.995;
const PROJECTION_REFERENCE: f64 = 31.5;
const NOON_REFERENCE_N: u32 = 5;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let common = &cli.common;
    let file = RunFile::load(common.config.as_deref())?;
    let out = Output::new(&common.out, common.format, common.gnuplot)?;
    match &cli.command {
        Command::Sweep { grid } => sweep(&file.interferometer_or(InterferometerConfig::measured_fringes)?, grid, &out),
        Command::Fisher { grid, accounting, h, r_values } => fisher(
            &file.interferometer_or(InterferometerConfig::measured_fringes)?,
            grid,
            *accounting,
            *h,
            r_values.as_deref(),
            &out,
        ),
        Command::Thresholds { nbar_min, nbar_max, nbar_steps, noon_max, no_numeric } => thresholds(
            &file.interferometer_or(|| Ok(InterferometerConfig::default()))?,
            (*nbar_min, *nbar_max, *nbar_steps),
            *noon_max,
            !no_numeric,
            &out,
        ),
        Command::Scaling { nbar_min, nbar_max, nbar_steps } => scaling(
            &file.interferometer_or(|| Ok(InterferometerConfig::default()))?,
            (*nbar_min, *nbar_max, *nbar_steps),
            &out,
        ),
        Command::Estimate { counts, calibration, branch_lo, branch_hi, objective, bootstrap } => {
            let cfg = file.interferometer_or(InterferometerConfig::measured_tracking)?;
            let cal = match calibration {
                Some(path) => CalibrationModel::load(path).with_context(|| format!("loading {}", path.display()))?,
                None => CalibrationModel::from_config(&cfg)?,
            };
            let branch = Branch::new(*branch_lo, *branch_hi)?;
            estimate(counts, &cal, &branch, *objective, *bootstrap, common.seed.unwrap_or(0), &out)
        }
        Command::Track { track: args } => {
            let cfg = file.interferometer_or(InterferometerConfig::measured_tracking)?;
            let scenario = file.scenario.clone().unwrap_or_else(TrackingScenario::fig4);
            track(&cfg, scenario, args, common, &out)
        }
        Command::Validate { n_max, phi_steps } => validate(*n_max, *phi_steps, &out),
        Command::Reproduce { preset } => reproduce(*preset, &file, common, &out),
    }
}

fn phi_grid(grid: &PhiGrid) -> anyhow::Result<Vec<f64>> {
    linspace(grid.phi_min, grid.phi_max, grid.phi_steps, "phase grid")
}

fn linspace(lo: f64, hi: f64, steps: usize, what: &str) -> anyhow::Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::Precondition(format!("{what} needs at least 2 points, got {steps}")).into());
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidArgument(format!("{what} [{lo}, {hi}] is empty")).into());
    }
    Ok((0..steps).map(|k| if k + 1 == steps { hi } else { lo + (hi - lo) * k as f64 / (steps - 1) as f64 }).collect())
}

#[derive(Serialize)]
struct SweepRow {
    phi: f64,
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
}

fn sweep(cfg: &InterferometerConfig, grid: &PhiGrid, out: &Output) -> anyhow::Result<()> {
    cfg.validate()?;
    let phis = phi_grid(grid)?;
    let rows: Vec<SweepRow> = phis
        .iter()
        .map(|&phi| {
            let p = click_model(cfg, phi)?;
            Ok(SweepRow { phi, p00: p.p00, p01: p.p01, p10: p.p10, p11: p.p11 })
        })
        .collect::<stimsqueeze::Result<_>>()?;
    let p11: Vec<f64> = rows.iter().map(|r| r.p11).collect();
    out.table("sweep", &rows)?;
    out.gnuplot("sweep", "phi (rad)", "probability", &[Curve(2, "p00"), Curve(3, "p01"), Curve(4, "p10"), Curve(5, "p11")])?;
    println!("overlap = {:.6}", cfg.overlap);
    println!("visibility_p11_grid = {:.4}", fringe_visibility(&p11)?);
    println!("visibility_p11 = {:.4}", model_visibility(cfg)?);
    Ok(())
}

fn fisher(
    cfg: &InterferometerConfig,
    grid: &PhiGrid,
    accounting: PhotonAccounting,
    h: f64,
    r_values: Option<&[f64]>,
    out: &Output,
) -> anyhow::Result<()> {
    let phis = phi_grid(grid)?;
    let reports = fisher_sweep(cfg, &phis, h, accounting)?;
    out.table("fisher", &reports)?;
    out.gnuplot("fisher", "phi (rad)", "Fisher information", &[Curve(2, "per trial"), Curve(4, "per photon")])?;
    let best = best_report(cfg, h, accounting)?;
    let noon = NoonBaseline::new(NOON_REFERENCE_N, 1.0)?;
    println!("mean_photons = {:.4}", best.mean_photons_through_sample);
    println!("max_fisher_per_trial = {:.4} at phi = {:.4}", best.fisher_per_trial, best.phi);
    println!("max_fisher_per_photon = {:.4}", best.fisher_per_photon);
    println!("snl_per_photon = {:.4}", best.snl_per_photon);
    println!("noon{}_per_photon = {:.4}", noon.n, noon.fisher_per_photon);
    println!("enhancement_db = {:.3}", best.enhancement_db);
    if let Some(rs) = r_values {
        let rows = squeezing_sweep(cfg, rs, h, accounting)?;
        out.table("fisher_vs_r", &rows)?;
        out.gnuplot("fisher_vs_r", "r", "Fisher information per photon", &[Curve(4, "best phase")])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct NoonRow {
    n: u32,
    eta_noon: f64,
    fisher_per_photon_ideal: f64,
}

fn thresholds(
    cfg: &InterferometerConfig,
    (lo, hi, steps): (f64, f64, usize),
    noon_max: u32,
    numeric: bool,
    out: &Output,
) -> anyhow::Result<()> {
    let n_bars = linspace(lo, hi, steps, "photon-number grid")?;
    let rows = threshold_table(cfg, &n_bars, numeric)?;
    out.table("thresholds_tm", &rows)?;
    out.gnuplot("thresholds_tm", "mean photon number", "efficiency threshold", &[Curve(2, "closed form"), Curve(3, "numeric")])?;
    let noon: Vec<NoonRow> = (1..=noon_max)
        .map(|n| {
            let b = NoonBaseline::new(n, 1.0)?;
            Ok(NoonRow { n, eta_noon: b.threshold, fisher_per_photon_ideal: b.fisher_per_photon })
        })
        .collect::<stimsqueeze::Result<_>>()?;
    out.table("thresholds_noon", &noon)?;
    out.gnuplot("thresholds_noon", "N", "efficiency threshold", &[Curve(2, "NOON")])?;
    let worst = rows
        .iter()
        .filter_map(|r| r.eta_tm_numeric.map(|n| (n - r.eta_tm).abs()))
        .fold(0.0, f64::max);
    println!("threshold_points = {}", rows.len());
    if numeric {
        println!("max_numeric_deviation = {worst:.2e}");
    }
    Ok(())
}

fn scaling(cfg: &InterferometerConfig, (lo, hi, steps): (f64, f64, usize), out: &Output) -> anyhow::Result<()> {
    if !(lo > 0.0) {
        return Err(Error::InvalidArgument("scaling grid must start above 0".into()).into());
    }
    let logs = linspace(lo.ln(), hi.ln(), steps, "photon-number grid")?;
    let rows: Vec<_> =
        logs.iter().map(|l| ideal_scaling(l.exp(), cfg.snl_per_photon)).collect::<stimsqueeze::Result<_>>()?;
    out.table("scaling", &rows)?;
    out.gnuplot("scaling", "mean photon number", "phase uncertainty (rad)", &[Curve(2, "scheme"), Curve(3, "SNL"), Curve(4, "NOON")])?;
    println!("scaling_points = {}", rows.len());
    Ok(())
}

#[derive(Deserialize)]
struct CountsRow {
    n00: u64,
    n01: u64,
    n10: u64,
    n11: u64,
}

#[derive(Serialize)]
struct EstimateRow {
    row: usize,
    trials: u64,
    n00: u64,
    n01: u64,
    n10: u64,
    n11: u64,
    phi_est: f64,
    sigma: f64,
    objective_value: f64,
    low_information: bool,
}

fn estimate(
    counts_path: &std::path::Path,
    cal: &CalibrationModel,
    branch: &Branch,
    objective: Objective,
    bootstrap: usize,
    seed: u64,
    out: &Output,
) -> anyhow::Result<()> {
    let file = File::open(counts_path).with_context(|| format!("opening {}", counts_path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for (row, record) in reader.deserialize::<CountsRow>().enumerate() {
        let c = record.map_err(|e| Error::InvalidConfig(format!("{}: {e}", counts_path.display())))?;
        let counts = [c.n00, c.n01, c.n10, c.n11];
        let est = estimate_counts(&counts, cal, branch, objective)?;
        let sigma = if bootstrap > 0 {
            bootstrap_sigma_in_stream(&counts, cal, branch, bootstrap, seed, row as u64, objective)?
        } else {
            est.sigma
        };
        rows.push(EstimateRow {
            row,
            trials: est.window_trials,
            n00: c.n00,
            n01: c.n01,
            n10: c.n10,
            n11: c.n11,
            phi_est: est.phi_est,
            sigma,
            objective_value: est.objective_value,
            low_information: est.low_information,
        });
    }
    out.table("estimates", &rows)?;
    println!("windows = {}", rows.len());
    println!("low_information = {}", rows.iter().filter(|r| r.low_information).count());
    Ok(())
}

fn track(
    cfg: &InterferometerConfig,
    mut scenario: TrackingScenario,
    args: &TrackArgs,
    common: &Common,
    out: &Output,
) -> anyhow::Result<()> {
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    if let Some(repeats) = args.repeats {
        scenario.repeats = repeats;
    }
    if let Some(rate) = args.repetition_rate {
        scenario.repetition_rate = rate;
    }
    if let Some(b) = args.bootstrap {
        scenario.bootstrap_resamples = b;
    }
    scenario.validate()?;
    cfg.validate()?;
    let cal = if let Some(path) = &args.calibration {
        CalibrationModel::load(path).with_context(|| format!("loading {}", path.display()))?
    } else if args.exact_calibration {
        CalibrationModel::from_config(cfg)?
    } else {
        let samples = synthetic_calibration_samples(cfg, CALIBRATION_POINTS, CALIBRATION_TRIALS, scenario.seed)?;
        calibrate(&samples, cfg)?
    };
    if common.verbose > 0 {
        eprintln!("calibration: {:?} residual {:.3e}", cal.params(), cal.fit_residual());
    }
    cal.save(&out.path("calibration.json"))?;

    let run = run_tracking(&scenario, cfg, &cal)?;
    let report = sensitivity_report(&run, cfg.snl_per_photon, args.accounting)?;
    match common.format {
        Format::Csv => {
            let path = out.path("tracking.csv");
            let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_records_csv(&run, file)?;
        }
        Format::Json => {
            out.json("tracking", &run.records)?;
        }
    }
    out.table("tracking_phases", &report.phases)?;
    out.gnuplot("tracking_phases", "phi (rad)", "phase uncertainty (rad)", &[Curve(2, "measured"), Curve(3, "Fisher bound"), Curve(4, "SNL")])?;
    out.json("tracking_summary", &TrackingSummary::new(&run, report.clone()))?;

    println!("trials_per_window = {} (repetition rate {:.3e} /s assumed)", run.trials_per_window, scenario.repetition_rate);
    println!("windows = {}", run.records.len());
    for (p, s) in run.phases.iter().zip(&report.phases) {
        println!(
            "phi_set = {:.3}  mean = {:.5}  std = {:.3e}  crlb = {:.3e}  db = {:+.2}  within_3std = {}{}",
            p.phi_set,
            p.mean_est,
            p.std,
            p.crlb,
            s.enhancement_db,
            p.within_three_std,
            if p.low_information { "  low-information" } else { "" }
        );
    }
    if let Some(best) = report.best {
        let b = &report.phases[best];
        println!(
            "best: phi_set = {:.3}  delta_phi = {:.3e} rad  enhancement = {:+.2} dB",
            b.phi_set, b.delta_phi, b.enhancement_db
        );
    }
    println!(
        "reference (informational): {:.2} dB, {:.3} rad; within ±1.5 dB band = {}",
        report.reference_enhancement_db, report.reference_delta_phi, report.within_reference_band
    );
    Ok(())
}

fn validate(n_max: usize, phi_steps: usize, out: &Output) -> anyhow::Result<()> {
    let mut cases = Vec::new();
    for r in ORACLE_R_VALUES {
        for eta in ORACLE_ETA_VALUES {
            let case = oracle_case(&InterferometerConfig::symmetric(r, eta), phi_steps, n_max)?;
            println!(
                "r = {:.2}  eta = {:.2}  n_max = {}  bound = {:.2e}  max|dp| = {:.2e}",
                case.r, case.eta, case.n_max, case.truncation_bound, case.max_abs_diff
            );
            cases.push(case);
        }
    }
    out.table("validate", &cases)?;
    let worst = cases.iter().map(|c| c.max_abs_diff).fold(0.0, f64::max);
    println!("max|dp| = {worst:.2e} (tolerance {ORACLE_TOLERANCE:.0e})");
    if worst > ORACLE_TOLERANCE {
        return Err(ValidationFailed(format!("max |Δp| = {worst:.3e} exceeds {ORACLE_TOLERANCE:.0e}")).into());
    }
    println!("PASS");
    Ok(())
}

#[derive(Serialize)]
struct ProjectionRow {
    r: f64,
    overlap: f64,
    ancilla_detected: bool,
    phi_opt: f64,
    fisher_per_photon: f64,
    reference: f64,
}

fn reproduce(preset: Preset, file: &RunFile, common: &Common, out: &Output) -> anyhow::Result<()> {
    match preset {
        Preset::Fig1b => {
            let out = out.subdir("fig1b")?;
            scaling(&file.interferometer_or(|| Ok(InterferometerConfig::default()))?, (0.01, 100.0, 41), &out)
        }
        Preset::Fig1c => {
            let out = out.subdir("fig1c")?;
            thresholds(&file.interferometer_or(|| Ok(InterferometerConfig::default()))?, (0.0, 3.0, 31), 20, true, &out)
        }
        Preset::Fig3 => {
            let out = out.subdir("fig3")?;
            let cfg = file.interferometer_or(InterferometerConfig::measured_fringes)?;
            let grid = PhiGrid { phi_min: 0.0, phi_max: std::f64::consts::PI, phi_steps: 181 };
            sweep(&cfg, &grid, &out)?;
            let rs: Vec<f64> = (0..13).map(|k| 0.11 + 0.04 * k as f64).collect();
            fisher(&cfg, &grid, PhotonAccounting::SinglePass, DEFAULT_STEP, Some(&rs), &out)?;
            let ideal_rows = squeezing_sweep(&InterferometerConfig::ideal(0.11), &rs, DEFAULT_STEP, PhotonAccounting::SinglePass)?;
            out.table("fisher_vs_r_ideal", &ideal_rows)?;
            let mut projection = Vec::new();
            for ancilla_detected in [true, false] {
                let cfg = InterferometerConfig { overlap: PROJECTION_OVERLAP, ancilla_detected, ..InterferometerConfig::ideal(PROJECTION_R) };
                let best = best_report(&cfg, DEFAULT_STEP, PhotonAccounting::SinglePass)?;
                println!(
                    "projection r = {PROJECTION_R}, overlap = {PROJECTION_OVERLAP}, ancilla_detected = {ancilla_detected}: {:.2} rad^-2 (reference {PROJECTION_REFERENCE})",
                    best.fisher_per_photon
                );
                projection.push(ProjectionRow {
                    r: PROJECTION_R,
                    overlap: PROJECTION_OVERLAP,
                    ancilla_detected,
                    phi_opt: best.phi,
                    fisher_per_photon: best.fisher_per_photon,
                    reference: PROJECTION_REFERENCE,
                });
            }
            out.table("projection", &projection)?;
            Ok(())
        }
        Preset::Fig4 => {
            let out = out.subdir("fig4")?;
            let cfg = file.interferometer_or(InterferometerConfig::measured_tracking)?;
            let scenario = file
                .scenario
                .clone()
                .unwrap_or_else(|| TrackingScenario { bootstrap_resamples: PRESET_BOOTSTRAP, ..TrackingScenario::fig4() });
            let args = TrackArgs {
                calibration: None,
                exact_calibration: false,
                repeats: None,
                repetition_rate: None,
                bootstrap: None,
                accounting: PhotonAccounting::SinglePass,
            };
            track(&cfg, scenario, &args, common, &out)
        }
    }
}
