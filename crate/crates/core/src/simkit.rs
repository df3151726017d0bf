//! Monte Carlo engine: click sampling, phase-tracking replays and
//! sensitivity reports against the shot-noise limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;

use crate::config::InterferometerConfig;
use crate::detection::click_model;
use crate::error::{Error, Result};
use crate::estimation::{
    bootstrap_sigma_in_stream, crlb, estimate_counts, sample_std, Branch, CalibrationModel, CalibrationSample, Objective,
};
use crate::metrology::PhotonAccounting;
use crate::random::{sample_multinomial, stream_rng, DOMAIN_CALIBRATION, DOMAIN_SAMPLING};

pub const TRACKING_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_WINDOW: f64 = 0.2;
/// Assumed pulse rate (trials/s); not fixed by the experiment description.
pub const DEFAULT_REPETITION_RATE: f64 = 7.6e7;
pub const DEFAULT_REPEATS: usize = 200;
/// Reference values of the tracking experiment, reported for comparison only.
pub const REFERENCE_ENHANCEMENT_DB: f64 = 3.56;
pub const REFERENCE_BEST_SENSITIVITY: f64 = 0.002;
/// Half-width of the informational band around the reference enhancement.
pub const REFERENCE_ENHANCEMENT_BAND_DB: f64 = 1.5;

/// Multinomial click counts of `trials` independent trials at phase `phi`.
pub fn sample_clicks(cfg: &InterferometerConfig, phi: f64, trials: u64, seed: u64) -> Result<[u64; 4]> {
    sample_clicks_in_stream(cfg, phi, trials, seed, 0)
}

pub fn sample_clicks_in_stream(
    cfg: &InterferometerConfig,
    phi: f64,
    trials: u64,
    seed: u64,
    stream: u64,
) -> Result<[u64; 4]> {
    if trials < 1 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let probs = click_model(cfg, phi)?.as_array();
    sample_multinomial(&mut stream_rng(seed, DOMAIN_SAMPLING, stream), trials, &probs)
}

/// Synthetic fringe scan for calibration: `points` evenly spaced phases over
/// `[0, π)` with `trials` trials each.
pub fn synthetic_calibration_samples(
    cfg: &InterferometerConfig,
    points: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<CalibrationSample>> {
    if trials < 1 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    (0..points)
        .map(|k| {
            let phi = k as f64 * PI / points as f64;
            let probs = click_model(cfg, phi)?.as_array();
            let counts = sample_multinomial(&mut stream_rng(seed, DOMAIN_CALIBRATION, k as u64), trials, &probs)?;
            Ok(CalibrationSample { phi, counts })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseStep {
    pub phi_set: f64,
    /// Seconds; a multiple of the window length.
    pub duration: f64,
}

/// Schedule and sampling settings of a tracking replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingScenario {
    pub phase_schedule: Vec<PhaseStep>,
    /// Sampling window (s).
    pub window: f64,
    /// Trials per second.
    pub repetition_rate: f64,
    /// Independent replays of every window.
    pub repeats: usize,
    pub seed: u64,
    pub branch_lo: f64,
    pub branch_hi: f64,
    /// Bootstrap resamples per window; 0 reports the Fisher bound as sigma.
    pub bootstrap_resamples: usize,
    pub objective: Objective,
}

impl Default for TrackingScenario {
    fn default() -> Self {
        Self {
            phase_schedule: Vec::new(),
            window: DEFAULT_WINDOW,
            repetition_rate: DEFAULT_REPETITION_RATE,
            repeats: DEFAULT_REPEATS,
            seed: 0,
            branch_lo: 0.0,
            branch_hi: FRAC_PI_4,
            bootstrap_resamples: 0,
            objective: Objective::LeastSquares,
        }
    }
}

impl TrackingScenario {
    /// Eleven set phases 0.08, 0.13, …, 0.58 rad, one window each.
    pub fn fig4() -> Self {
        let phase_schedule =
            (0..11).map(|k| PhaseStep { phi_set: 0.08 + 0.05 * k as f64, duration: DEFAULT_WINDOW }).collect();
        Self { phase_schedule, ..Self::default() }
    }

    pub fn branch(&self) -> Result<Branch> {
        Branch::new(self.branch_lo, self.branch_hi)
    }

    pub fn trials_per_window(&self) -> u64 {
        (self.repetition_rate * self.window).round() as u64
    }

    pub fn windows_in(&self, step: &PhaseStep) -> usize {
        (step.duration / self.window).round() as usize
    }

    pub fn window_count(&self) -> usize {
        self.phase_schedule.iter().map(|s| self.windows_in(s)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::InvalidConfig(format!("window = {} must be positive", self.window)));
        }
        if !(self.repetition_rate > 0.0 && self.repetition_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("repetition_rate = {} must be positive", self.repetition_rate)));
        }
        if self.trials_per_window() < 1 {
            return Err(Error::InvalidConfig("window holds less than one trial".into()));
        }
        if self.repeats < 1 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        let branch = self.branch().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for step in &self.phase_schedule {
            let ratio = step.duration / self.window;
            if !(step.duration >= 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::InvalidConfig(format!(
                    "duration {} is not a multiple of the window {}",
                    step.duration, self.window
                )));
            }
            if !branch.contains(step.phi_set) {
                return Err(Error::Precondition(format!(
                    "set phase {} is outside the branch [{}, {}]",
                    step.phi_set, self.branch_lo, self.branch_hi
                )));
            }
        }
        Ok(())
    }
}

/// One estimated window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub step: usize,
    pub phi_set: f64,
    pub window: usize,
    pub repeat: usize,
    pub trials: u64,
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
    pub phi_est: f64,
    pub sigma: f64,
    pub objective_value: f64,
    pub low_information: bool,
}

impl WindowRecord {
    pub fn counts(&self) -> [u64; 4] {
        [self.n00, self.n01, self.n10, self.n11]
    }
}

/// Statistics of all windows sharing one set phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAggregate {
    pub step: usize,
    pub phi_set: f64,
    pub estimates: usize,
    pub mean_est: f64,
    pub bias: f64,
    /// Sample standard deviation of the estimates.
    pub std: f64,
    pub crlb: f64,
    /// |mean − set| < 3 std.
    pub within_three_std: bool,
    pub low_information: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingRun {
    pub scenario: TrackingScenario,
    pub config: InterferometerConfig,
    pub trials_per_window: u64,
    pub records: Vec<WindowRecord>,
    pub phases: Vec<PhaseAggregate>,
}

/// Samples, estimates and aggregates every window of the scenario.
///
/// Window `i` (ordered by step, window, repeat) draws its counts from stream
/// `i` of the scenario seed and nests its bootstrap streams under `i`, so the
/// result does not depend on scheduling.
pub fn run_tracking(scn: &TrackingScenario, cfg: &InterferometerConfig, cal: &CalibrationModel) -> Result<TrackingRun> {
    scn.validate()?;
    cfg.validate()?;
    let branch = scn.branch()?;
    let trials = scn.trials_per_window();
    let mut jobs = Vec::new();
    for (step, ps) in scn.phase_schedule.iter().enumerate() {
        for window in 0..scn.windows_in(ps) {
            for repeat in 0..scn.repeats {
                jobs.push((step, ps.phi_set, window, repeat));
            }
        }
    }
    let records: Vec<WindowRecord> = jobs
        .par_iter()
        .enumerate()
        .map(|(id, &(step, phi_set, window, repeat))| {
            let counts = sample_clicks_in_stream(cfg, phi_set, trials, scn.seed, id as u64)?;
            let est = estimate_counts(&counts, cal, &branch, scn.objective)?;
            let sigma = if scn.bootstrap_resamples > 0 {
                bootstrap_sigma_in_stream(&counts, cal, &branch, scn.bootstrap_resamples, scn.seed, id as u64, scn.objective)?
            } else {
                est.sigma
            };
            Ok(WindowRecord {
                step,
                phi_set,
                window,
                repeat,
                trials,
                n00: counts[0],
                n01: counts[1],
                n10: counts[2],
                n11: counts[3],
                phi_est: est.phi_est,
                sigma,
                objective_value: est.objective_value,
                low_information: est.low_information,
            })
        })
        .collect::<Result<_>>()?;

    let mut phases = Vec::with_capacity(scn.phase_schedule.len());
    for (step, ps) in scn.phase_schedule.iter().enumerate() {
        let mine: Vec<&WindowRecord> = records.iter().filter(|r| r.step == step).collect();
        if mine.is_empty() {
            continue;
        }
        let estimates: Vec<f64> = mine.iter().map(|r| r.phi_est).collect();
        let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
        let std = sample_std(&estimates);
        phases.push(PhaseAggregate {
            step,
            phi_set: ps.phi_set,
            estimates: estimates.len(),
            mean_est: mean,
            bias: mean - ps.phi_set,
            std,
            crlb: crlb(cal, ps.phi_set, trials)?,
            within_three_std: (mean - ps.phi_set).abs() < 3.0 * std,
            low_information: mine.iter().any(|r| r.low_information),
        });
    }
    Ok(TrackingRun { scenario: scn.clone(), config: *cfg, trials_per_window: trials, records, phases })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSensitivity {
    pub phi_set: f64,
    /// Measured spread of the estimates (rad).
    pub delta_phi: f64,
    pub crlb: f64,
    /// Shot-noise sensitivity for the same number of photons through the sample.
    pub delta_phi_snl: f64,
    pub enhancement_db: f64,
    pub crlb_enhancement_db: f64,
    pub low_information: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub trials_per_window: u64,
    pub repetition_rate: f64,
    pub photons_per_trial: f64,
    pub snl_per_photon: f64,
    pub accounting: PhotonAccounting,
    pub phases: Vec<PhaseSensitivity>,
    /// Index into `phases` of the largest measured enhancement.
    pub best: Option<usize>,
    pub best_enhancement_db: f64,
    pub best_delta_phi: f64,
    pub reference_enhancement_db: f64,
    pub reference_delta_phi: f64,
    /// Whether the best enhancement lies within ±1.5 dB of the reference.
    pub within_reference_band: bool,
}

/// Per-phase sensitivities against the photon-matched shot-noise limit,
/// `20 log10(Δφ_SNL / Δφ)` with `Δφ_SNL = 1/√(T n̄ F_SNL)`.
pub fn sensitivity_report(
    run: &TrackingRun,
    snl_per_photon: f64,
    accounting: PhotonAccounting,
) -> Result<SensitivityReport> {
    if run.phases.is_empty() {
        return Err(Error::Precondition("tracking run is empty".into()));
    }
    let photons = accounting.photons_through_sample(&run.config);
    let trials = run.trials_per_window as f64;
    let snl = 1.0 / (trials * photons * snl_per_photon).sqrt();
    let db = |delta: f64| if delta > 0.0 { 20.0 * (snl / delta).log10() } else { f64::NAN };
    let phases: Vec<PhaseSensitivity> = run
        .phases
        .iter()
        .map(|p| PhaseSensitivity {
            phi_set: p.phi_set,
            delta_phi: p.std,
            crlb: p.crlb,
            delta_phi_snl: snl,
            enhancement_db: if p.estimates > 1 { db(p.std) } else { f64::NAN },
            crlb_enhancement_db: db(p.crlb),
            low_information: p.low_information,
        })
        .collect();
    let best = phases
        .iter()
        .enumerate()
        .filter(|(_, p)| p.enhancement_db.is_finite() && !p.low_information)
        .max_by(|a, b| a.1.enhancement_db.total_cmp(&b.1.enhancement_db))
        .map(|(i, _)| i);
    let (best_db, best_delta) = best.map_or((f64::NAN, f64::NAN), |i| (phases[i].enhancement_db, phases[i].delta_phi));
    Ok(SensitivityReport {
        trials_per_window: run.trials_per_window,
        repetition_rate: run.scenario.repetition_rate,
        photons_per_trial: photons,
        snl_per_photon,
        accounting,
        phases,
        best,
        best_enhancement_db: best_db,
        best_delta_phi: best_delta,
        reference_enhancement_db: REFERENCE_ENHANCEMENT_DB,
        reference_delta_phi: REFERENCE_BEST_SENSITIVITY,
        within_reference_band: (best_db - REFERENCE_ENHANCEMENT_DB).abs() <= REFERENCE_ENHANCEMENT_BAND_DB,
    })
}

/// JSON summary written next to the per-window CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSummary {
    pub format_version: u32,
    pub scenario: TrackingScenario,
    pub config: InterferometerConfig,
    pub trials_per_window: u64,
    pub window_count: usize,
    pub phases: Vec<PhaseAggregate>,
    pub report: SensitivityReport,
}

impl TrackingSummary {
    pub fn new(run: &TrackingRun, report: SensitivityReport) -> Self {
        Self {
            format_version: TRACKING_FORMAT_VERSION,
            scenario: run.scenario.clone(),
            config: run.config,
            trials_per_window: run.trials_per_window,
            window_count: run.scenario.window_count(),
            phases: run.phases.clone(),
            report,
        }
    }
}

/// Writes one CSV row per window.
pub fn write_records_csv<W: Write>(run: &TrackingRun, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in &run.records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads rows written by [`write_records_csv`].
pub fn read_records_csv<R: std::io::Read>(input: R) -> Result<Vec<WindowRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    reader.deserialize().map(|row| row.map_err(Error::from)).collect()
}
