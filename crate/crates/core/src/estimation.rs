//! Calibration-curve fitting, single-window phase estimation, bootstrap
//! uncertainty and the Cramér–Rao bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::cell::Cell;
use std::path::Path;

use crate::config::InterferometerConfig;
use crate::detection::{click_model, ClickDistribution};
use crate::error::{Error, Result};
use crate::metrology::{fisher_per_trial, DEFAULT_STEP};
use crate::optimize::grid_then_golden_min;
use crate::random::{child_index, sample_multinomial, stream_rng, DOMAIN_BOOTSTRAP};

/// Version written into serialized calibration documents.
pub const CALIBRATION_FORMAT_VERSION: u32 = 1;
/// Knots of the curve tabulation over one period.
pub const DEFAULT_TABULATION_POINTS: usize = 4096;
/// Objective-evaluation budget of the calibration fit.
pub const MAX_CALIBRATION_EVALUATIONS: usize = 10_000;
/// Final bracket width of the phase search (rad).
pub const ESTIMATE_TOL: f64 = 1e-6;
/// Grid spacing of the coarse phase scan (rad).
pub const ESTIMATE_GRID_SPACING: f64 = PI / 720.0;
/// An estimate is low-information when its Fisher information is below this
/// fraction of the branch maximum.
pub const LOW_INFORMATION_FRACTION: f64 = 0.05;
pub const MIN_BOOTSTRAP_RESAMPLES: usize = 100;
pub const MIN_BOOTSTRAP_COUNTS: u64 = 1000;
/// Minimum number of distinct phases accepted by [`calibrate`].
pub const MIN_CALIBRATION_PHASES: usize = 8;

/// Parameters adjusted by the calibration fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationParams {
    pub r1: f64,
    pub r2: f64,
    pub eta_h: f64,
    pub eta_v: f64,
    pub overlap: f64,
    pub phase_offset: f64,
}

impl CalibrationParams {
    pub fn from_config(cfg: &InterferometerConfig) -> Self {
        Self {
            r1: cfg.r1,
            r2: cfg.r2,
            eta_h: cfg.eta_h,
            eta_v: cfg.eta_v,
            overlap: cfg.overlap,
            phase_offset: cfg.phase_offset,
        }
    }

    /// `base` with the fitted fields replaced.
    pub fn apply(&self, base: &InterferometerConfig) -> InterferometerConfig {
        InterferometerConfig {
            r1: self.r1,
            r2: self.r2,
            eta_h: self.eta_h,
            eta_v: self.eta_v,
            overlap: self.overlap,
            phase_offset: self.phase_offset,
            ..*base
        }
    }

    fn to_array(self) -> [f64; 6] {
        [self.r1, self.r2, self.eta_h, self.eta_v, self.overlap, self.phase_offset]
    }

    fn from_array(x: [f64; 6]) -> Self {
        Self { r1: x[0], r2: x[1], eta_h: x[2], eta_v: x[3], overlap: x[4], phase_offset: x[5] }
    }
}

/// Search interval for the phase, at most half a fringe period wide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    lo: f64,
    hi: f64,
}

impl Branch {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidArgument(format!("branch [{lo}, {hi}] is empty")));
        }
        if lo < 0.0 || hi > PI + 1e-12 {
            return Err(Error::InvalidArgument(format!("branch [{lo}, {hi}] leaves [0, π]")));
        }
        if hi - lo > FRAC_PI_2 + 1e-12 {
            return Err(Error::Precondition(format!(
                "branch width {} exceeds half a period; the fringe is two-valued there",
                hi - lo
            )));
        }
        Ok(Self { lo, hi: hi.min(PI) })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, phi: f64) -> bool {
        (self.lo..=self.hi).contains(&phi)
    }
}

/// Distance measure between observed frequencies and calibration curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Unweighted sum of squared differences.
    #[default]
    LeastSquares,
    /// Negative multinomial log-likelihood per trial.
    MaximumLikelihood,
}

impl Objective {
    fn evaluate(self, freqs: &[f64; 4], probs: &[f64; 4]) -> f64 {
        match self {
            Objective::LeastSquares => freqs.iter().zip(probs).map(|(f, p)| (f - p).powi(2)).sum(),
            Objective::MaximumLikelihood => freqs
                .iter()
                .zip(probs)
                .filter(|(f, _)| **f > 0.0)
                .map(|(f, p)| -f * p.max(1e-300).ln())
                .sum(),
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least-squares" => Ok(Self::LeastSquares),
            "maximum-likelihood" => Ok(Self::MaximumLikelihood),
            other => Err(Error::InvalidArgument(format!("unknown objective `{other}`"))),
        }
    }
}

/// One point of calibration data: a set phase and the click counts observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub phi: f64,
    pub counts: [u64; 4],
}

/// Fitted model with its click probabilities tabulated over `[0, π)`.
#[derive(Debug, Clone)]
pub struct CalibrationModel {
    config: InterferometerConfig,
    points: usize,
    curves: Vec<[f64; 4]>,
    fisher: Vec<f64>,
    fit_residual: f64,
    degraded: bool,
    evaluations: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDocument {
    format_version: u32,
    params: CalibrationParams,
    config: InterferometerConfig,
    tabulation: TabulationMeta,
    fit_residual: f64,
    degraded: bool,
    evaluations: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulationMeta {
    points: usize,
    phi_min: f64,
    phi_max: f64,
    interpolation: String,
}

impl CalibrationModel {
    /// Tabulates the model of `cfg` without any fitting.
    pub fn from_config(cfg: &InterferometerConfig) -> Result<Self> {
        Self::with_points(cfg, DEFAULT_TABULATION_POINTS)
    }

    pub fn with_points(cfg: &InterferometerConfig, points: usize) -> Result<Self> {
        cfg.validate()?;
        if points < 16 {
            return Err(Error::InvalidArgument(format!("tabulation needs at least 16 points, got {points}")));
        }
        let step = PI / points as f64;
        let rows: Vec<([f64; 4], f64)> = (0..points)
            .into_par_iter()
            .map(|k| {
                let phi = k as f64 * step;
                let probs = click_model(cfg, phi)?.as_array();
                let fisher = fisher_per_trial(|p| click_model(cfg, p), phi, DEFAULT_STEP)?;
                Ok((probs, fisher))
            })
            .collect::<Result<_>>()?;
        let (curves, fisher) = rows.into_iter().unzip();
        Ok(Self { config: *cfg, points, curves, fisher, fit_residual: 0.0, degraded: false, evaluations: 0 })
    }

    pub fn config(&self) -> &InterferometerConfig {
        &self.config
    }

    pub fn params(&self) -> CalibrationParams {
        CalibrationParams::from_config(&self.config)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    /// True when the fit stopped on its evaluation budget.
    pub fn degraded(&self) -> bool {
        self.degraded
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn locate(&self, phi: f64) -> (usize, f64) {
        let t = phi.rem_euclid(PI) / (PI / self.points as f64);
        let i = (t.floor() as usize).min(self.points - 1);
        (i, t - i as f64)
    }

    /// Interpolated click probabilities (periodic Catmull-Rom spline).
    pub fn probabilities(&self, phi: f64) -> [f64; 4] {
        let n = self.points;
        let (i, u) = self.locate(phi);
        let p0 = &self.curves[(i + n - 1) % n];
        let p1 = &self.curves[i];
        let p2 = &self.curves[(i + 1) % n];
        let p3 = &self.curves[(i + 2) % n];
        let (u2, u3) = (u * u, u * u * u);
        std::array::from_fn(|k| {
            0.5 * (2.0 * p1[k]
                + (p2[k] - p0[k]) * u
                + (2.0 * p0[k] - 5.0 * p1[k] + 4.0 * p2[k] - p3[k]) * u2
                + (3.0 * p1[k] - p0[k] - 3.0 * p2[k] + p3[k]) * u3)
        })
    }

    /// Tabulated Fisher information per trial, linearly interpolated.
    pub fn fisher(&self, phi: f64) -> f64 {
        let (i, u) = self.locate(phi);
        (1.0 - u) * self.fisher[i] + u * self.fisher[(i + 1) % self.points]
    }

    fn knots_in(&self, branch: &Branch) -> impl Iterator<Item = usize> + '_ {
        let step = PI / self.points as f64;
        let first = (branch.lo / step).ceil() as usize;
        let last = ((branch.hi / step).floor() as usize).min(self.points);
        (first..=last).map(move |k| k % self.points)
    }

    fn peak_fisher(&self, branch: &Branch) -> f64 {
        self.knots_in(branch)
            .map(|k| self.fisher[k])
            .chain([self.fisher(branch.lo), self.fisher(branch.hi)])
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CalibrationDocument {
            format_version: CALIBRATION_FORMAT_VERSION,
            params: self.params(),
            config: self.config,
            tabulation: TabulationMeta {
                points: self.points,
                phi_min: 0.0,
                phi_max: PI,
                interpolation: "periodic-catmull-rom".into(),
            },
            fit_residual: self.fit_residual,
            degraded: self.degraded,
            evaluations: self.evaluations,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuilds the model from a document written by [`Self::to_json`]; the
    /// curves are re-tabulated from the stored parameters.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CalibrationDocument = serde_json::from_str(text)?;
        if doc.format_version != CALIBRATION_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported calibration format version {}",
                doc.format_version
            )));
        }
        if doc.params != CalibrationParams::from_config(&doc.config) {
            return Err(Error::InvalidConfig("params disagree with config".into()));
        }
        let mut model = Self::with_points(&doc.config, doc.tabulation.points)?;
        model.fit_residual = doc.fit_residual;
        model.degraded = doc.degraded;
        model.evaluations = doc.evaluations;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Result of one phase estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub phi_est: f64,
    /// Standard uncertainty (rad): the Fisher bound at the estimate unless
    /// replaced by a bootstrap value.
    pub sigma: f64,
    pub window_trials: u64,
    pub objective_value: f64,
    /// Tabulated Fisher information per trial at the estimate.
    pub fisher_per_trial: f64,
    pub low_information: bool,
}

/// Normalized frequencies of a count vector.
pub fn frequencies(counts: &[u64; 4]) -> Result<[f64; 4]> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Precondition("window contains no trials".into()));
    }
    Ok(counts.map(|c| c as f64 / total as f64))
}

fn search(freqs: &[f64; 4], cal: &CalibrationModel, branch: &Branch, objective: Objective) -> Result<(f64, f64)> {
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for k in cal.knots_in(branch) {
        for j in 0..4 {
            lo[j] = lo[j].min(cal.curves[k][j]);
            hi[j] = hi[j].max(cal.curves[k][j]);
        }
    }
    if (0..4).all(|j| !(hi[j] - lo[j] > 1e-10)) {
        return Err(Error::Unidentifiable(format!(
            "calibration curves are constant on [{}, {}]",
            branch.lo, branch.hi
        )));
    }
    let grid = ((branch.width() / ESTIMATE_GRID_SPACING).ceil() as usize).max(16) + 1;
    grid_then_golden_min(
        |phi| Ok(objective.evaluate(freqs, &cal.probabilities(phi))),
        branch.lo,
        branch.hi,
        grid,
        ESTIMATE_TOL,
    )
}

fn finish(phi: f64, value: f64, trials: u64, cal: &CalibrationModel, branch: &Branch) -> PhaseEstimate {
    let fisher = cal.fisher(phi);
    let sigma = if fisher > 0.0 { 1.0 / (trials as f64 * fisher).sqrt() } else { f64::INFINITY };
    PhaseEstimate {
        phi_est: phi,
        sigma,
        window_trials: trials,
        objective_value: value,
        fisher_per_trial: fisher,
        low_information: !(fisher >= LOW_INFORMATION_FRACTION * cal.peak_fisher(branch)) || fisher == 0.0,
    }
}

/// Phase in `branch` whose calibration curves best match the observed
/// frequencies. `window_trials` is 1 and `sigma` is the single-trial bound.
pub fn estimate_phase(
    observed: &ClickDistribution,
    cal: &CalibrationModel,
    branch: &Branch,
    objective: Objective,
) -> Result<PhaseEstimate> {
    let freqs = observed.as_array();
    let (phi, value) = search(&freqs, cal, branch, objective)?;
    Ok(finish(phi, value, 1, cal, branch))
}

/// As [`estimate_phase`] for raw counts; `sigma` is the Fisher bound for the
/// window's trial count.
pub fn estimate_counts(
    counts: &[u64; 4],
    cal: &CalibrationModel,
    branch: &Branch,
    objective: Objective,
) -> Result<PhaseEstimate> {
    let freqs = frequencies(counts)?;
    let (phi, value) = search(&freqs, cal, branch, objective)?;
    Ok(finish(phi, value, counts.iter().sum(), cal, branch))
}

/// Standard deviation of the estimate over `resamples` multinomial resamples
/// of `counts`. Resample `i` draws from stream `i` of `seed`.
pub fn bootstrap_sigma(
    counts: &[u64; 4],
    cal: &CalibrationModel,
    branch: &Branch,
    resamples: usize,
    seed: u64,
    objective: Objective,
) -> Result<f64> {
    bootstrap_sigma_in_stream(counts, cal, branch, resamples, seed, 0, objective)
}

/// Bootstrap with streams nested under `parent`, so callers running many
/// windows under one seed get independent resamples per window.
pub fn bootstrap_sigma_in_stream(
    counts: &[u64; 4],
    cal: &CalibrationModel,
    branch: &Branch,
    resamples: usize,
    seed: u64,
    parent: u64,
    objective: Objective,
) -> Result<f64> {
    if resamples < MIN_BOOTSTRAP_RESAMPLES {
        return Err(Error::Precondition(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_RESAMPLES} resamples, got {resamples}"
        )));
    }
    let total: u64 = counts.iter().sum();
    if total < MIN_BOOTSTRAP_COUNTS {
        return Err(Error::Precondition(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_COUNTS} counts, got {total}"
        )));
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Unidentifiable("all counts fall in a single outcome".into()));
    }
    let freqs = frequencies(counts)?;
    let estimates: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, DOMAIN_BOOTSTRAP, child_index(parent, i));
            let resampled = sample_multinomial(&mut rng, total, &freqs)?;
            let f = frequencies(&resampled)?;
            search(&f, cal, branch, objective).map(|(phi, _)| phi)
        })
        .collect::<Result<_>>()?;
    Ok(sample_std(&estimates))
}

/// Sample standard deviation with the `n - 1` normalization.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Cramér–Rao bound `1/√(T F(φ))` of the calibrated model; infinite where
/// the Fisher information vanishes.
pub fn crlb(cal: &CalibrationModel, phi: f64, trials: u64) -> Result<f64> {
    if trials < 1 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let cfg = *cal.config();
    let fisher = fisher_per_trial(|p| click_model(&cfg, p), phi, DEFAULT_STEP)?;
    Ok(if fisher > 0.0 { 1.0 / (trials as f64 * fisher).sqrt() } else { f64::INFINITY })
}

/// Settings of the calibration fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub max_evaluations: usize,
    pub tabulation_points: usize,
    /// Initial step per parameter (r1, r2, eta_h, eta_v, overlap, offset).
    pub initial_steps: [f64; 6],
    /// The search stops once every step is below this.
    pub min_step: f64,
    /// Fit a single squeezing parameter shared by both squeezers. A gain
    /// imbalance and a small mode mismatch shape the fringes almost
    /// identically, so the split between r1 and r2 is poorly determined.
    pub tie_squeezing: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            max_evaluations: MAX_CALIBRATION_EVALUATIONS,
            tabulation_points: DEFAULT_TABULATION_POINTS,
            initial_steps: [0.02, 0.02, 0.02, 0.02, 0.01, 0.02],
            min_step: 1e-7,
            tie_squeezing: true,
        }
    }
}

const LOWER: [f64; 6] = [0.0, 0.0, 0.0, 0.0, 0.0, -2.0 * PI];
const UPPER: [f64; 6] = [3.0, 3.0, 1.0, 1.0, 1.0, 2.0 * PI];

fn clamp_params(mut x: [f64; 6]) -> [f64; 6] {
    for i in 0..6 {
        x[i] = x[i].clamp(LOWER[i], UPPER[i]);
    }
    x
}

/// Probes each coordinate in turn, keeping the first improving move.
fn explore(
    f: &dyn Fn(&[f64; 6]) -> f64,
    base: [f64; 6],
    f_base: f64,
    steps: &[f64; 6],
    budget: usize,
    used: &Cell<usize>,
) -> ([f64; 6], f64) {
    let (mut y, mut fy) = (base, f_base);
    for i in (0..6).filter(|&i| steps[i] > 0.0) {
        for dir in [1.0, -1.0] {
            if used.get() >= budget {
                return (y, fy);
            }
            let mut trial = y;
            trial[i] = (y[i] + dir * steps[i]).clamp(LOWER[i], UPPER[i]);
            if trial[i] == y[i] {
                continue;
            }
            let ft = f(&trial);
            if ft < fy {
                y = trial;
                fy = ft;
                break;
            }
        }
    }
    (y, fy)
}

fn hooke_jeeves(
    f: &dyn Fn(&[f64; 6]) -> f64,
    x0: [f64; 6],
    options: &CalibrationOptions,
    used: &Cell<usize>,
) -> ([f64; 6], f64, bool) {
    let budget = options.max_evaluations;
    let mut steps = options.initial_steps;
    let mut x = x0;
    let mut fx = f(&x);
    while used.get() < budget {
        let (mut y, mut fy) = explore(f, x, fx, &steps, budget, used);
        if fy < fx {
            // pattern moves along the last successful direction
            loop {
                let prev = x;
                x = y;
                fx = fy;
                if used.get() >= budget {
                    break;
                }
                let pattern = clamp_params(std::array::from_fn(|i| 2.0 * x[i] - prev[i]));
                let fp = f(&pattern);
                let (z, fz) = explore(f, pattern, fp, &steps, budget, used);
                if fz < fx {
                    y = z;
                    fy = fz;
                } else {
                    break;
                }
            }
        } else {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
            if steps.iter().all(|&s| s < options.min_step) {
                return (x, fx, true);
            }
        }
    }
    (x, fx, false)
}

/// Fits the model to observed fringe data by least squares and tabulates the
/// fitted curves.
pub fn calibrate(samples: &[CalibrationSample], initial: &InterferometerConfig) -> Result<CalibrationModel> {
    calibrate_with(samples, initial, &CalibrationOptions::default())
}

/// Pattern search (Hooke–Jeeves: coordinate probes, pattern moves, halving
/// steps) over r1, r2, eta_h, eta_v, overlap and phase_offset, starting at
/// `initial`. Fields outside that set are kept from `initial`.
pub fn calibrate_with(
    samples: &[CalibrationSample],
    initial: &InterferometerConfig,
    options: &CalibrationOptions,
) -> Result<CalibrationModel> {
    initial.validate()?;
    let mut phases: Vec<f64> = samples.iter().map(|s| s.phi).collect();
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("calibration phases must be finite".into()));
    }
    phases.sort_by(f64::total_cmp);
    phases.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if phases.len() < MIN_CALIBRATION_PHASES {
        return Err(Error::Precondition(format!(
            "calibration needs at least {MIN_CALIBRATION_PHASES} distinct phases, got {}",
            phases.len()
        )));
    }
    let span = phases[phases.len() - 1] - phases[0];
    if span < FRAC_PI_2 - 1e-12 {
        return Err(Error::Precondition(format!("calibration phases span {span} rad, less than half a period")));
    }
    let data: Vec<(f64, [f64; 4])> =
        samples.iter().map(|s| Ok((s.phi, frequencies(&s.counts)?))).collect::<Result<_>>()?;

    let evaluations = Cell::new(0usize);
    let tie = options.tie_squeezing;
    let expand = |x: &[f64; 6]| {
        let mut x = *x;
        if tie {
            x[1] = x[0];
        }
        x
    };
    let objective = |x: &[f64; 6]| -> f64 {
        evaluations.set(evaluations.get() + 1);
        let cfg = CalibrationParams::from_array(expand(x)).apply(initial);
        let mut sum = 0.0;
        for (phi, freqs) in &data {
            match click_model(&cfg, *phi) {
                Ok(p) => sum += Objective::LeastSquares.evaluate(freqs, &p.as_array()),
                Err(_) => return f64::INFINITY,
            }
        }
        sum
    };
    let mut x0 = clamp_params(CalibrationParams::from_config(initial).to_array());
    let mut search_options = *options;
    if tie {
        x0[0] = 0.5 * (x0[0] + x0[1]);
        search_options.initial_steps[1] = 0.0;
    }
    let (x, fx, converged) = hooke_jeeves(&objective, x0, &search_options, &evaluations);
    let x = expand(&x);

    let cfg = CalibrationParams::from_array(x).apply(initial);
    let mut model = CalibrationModel::with_points(&cfg, options.tabulation_points)?;
    model.fit_residual = fx;
    model.degraded = !converged;
    model.evaluations = evaluations.get();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MEASURED_PHASE_OFFSET;
    use crate::random::DOMAIN_SAMPLING;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;
    use std::sync::OnceLock;

    fn tracking_cal() -> &'static CalibrationModel {
        static CAL: OnceLock<CalibrationModel> = OnceLock::new();
        CAL.get_or_init(|| CalibrationModel::from_config(&InterferometerConfig::measured_tracking().unwrap()).unwrap())
    }

    fn tracking_branch() -> Branch {
        Branch::new(0.0, FRAC_PI_4).unwrap()
    }

    fn draw(cfg: &InterferometerConfig, phi: f64, trials: u64, seed: u64, index: u64) -> [u64; 4] {
        let probs = click_model(cfg, phi).unwrap().as_array();
        sample_multinomial(&mut stream_rng(seed, DOMAIN_SAMPLING, index), trials, &probs).unwrap()
    }

    #[test]
    fn tabulation_invariants() {
        let cal = tracking_cal();
        for k in 0..cal.points() {
            let row = cal.curves[k];
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        let cfg = cal.config();
        let a = click_model(cfg, 0.0).unwrap().as_array();
        let b = click_model(cfg, PI).unwrap().as_array();
        for j in 0..4 {
            assert!((a[j] - b[j]).abs() < 1e-9);
        }
        for phi in [0.013, 0.58, 1.234_567, 2.9, 3.1] {
            let exact = click_model(cfg, phi).unwrap().as_array();
            let interp = cal.probabilities(phi);
            assert!((interp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for j in 0..4 {
                assert!((exact[j] - interp[j]).abs() < 1e-8, "φ={phi} j={j}");
            }
        }
    }

    #[test]
    fn branch_validation() {
        assert!(Branch::new(0.5, 0.5).is_err());
        assert!(Branch::new(-0.1, 0.5).is_err());
        assert!(matches!(Branch::new(0.0, 2.0), Err(Error::Precondition(_))));
        assert!(Branch::new(0.0, FRAC_PI_2).is_ok());
    }

    #[test]
    fn noiseless_frequencies_are_a_fixed_point() {
        let cal = tracking_cal();
        let observed = ClickDistribution::from_array(cal.probabilities(0.58)).unwrap();
        let est = estimate_phase(&observed, cal, &tracking_branch(), Objective::LeastSquares).unwrap();
        assert!((est.phi_est - 0.58).abs() < 1e-6, "{est:?}");
        assert!(!est.low_information);
        let mle = estimate_phase(&observed, cal, &tracking_branch(), Objective::MaximumLikelihood).unwrap();
        assert!((mle.phi_est - 0.58).abs() < 1e-6);
    }

    #[test]
    fn flat_curves_are_unidentifiable() {
        let cal = CalibrationModel::with_points(&InterferometerConfig::symmetric(0.5, 0.0), 64).unwrap();
        let observed = ClickDistribution::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let err = estimate_phase(&observed, &cal, &tracking_branch(), Objective::LeastSquares).unwrap_err();
        assert!(matches!(err, Error::Unidentifiable(_)));
    }

    #[test]
    fn extremum_is_low_information() {
        let cal = tracking_cal();
        let branch = Branch::new(MEASURED_PHASE_OFFSET - 0.3, MEASURED_PHASE_OFFSET + 0.3).unwrap();
        let counts = [60_000u64, 20_000, 20_000, 0];
        let at_dark = cal.probabilities(MEASURED_PHASE_OFFSET).map(|p| (p * 1e5).round() as u64);
        let est = estimate_counts(&at_dark, cal, &branch, Objective::LeastSquares).unwrap();
        assert!(est.low_information, "{est:?}");
        let good = estimate_counts(&draw(cal.config(), 0.58, 100_000, 0, 0), cal, &tracking_branch(), Objective::LeastSquares)
            .unwrap();
        assert!(!good.low_information);
        assert!(est.sigma > 10.0 * good.sigma);
        let _ = counts;
    }

    #[test]
    fn crlb_scaling_and_closed_form() {
        let cal = CalibrationModel::with_points(&InterferometerConfig::ideal(0.59), 256).unwrap();
        let one = crlb(&cal, FRAC_PI_2, 1).unwrap();
        assert!((one - 0.33933).abs() < 3e-4, "{one}");
        let hundred = crlb(&cal, FRAC_PI_2, 100).unwrap();
        assert!((one / hundred - 10.0).abs() < 1e-9);
        assert!(crlb(&cal, 0.3, 0).is_err());
        let dead = CalibrationModel::with_points(&InterferometerConfig::symmetric(0.5, 0.0), 64).unwrap();
        assert!(crlb(&dead, 0.3, 10).unwrap().is_infinite());
    }

    #[test]
    fn monte_carlo_spread_matches_crlb() {
        let cal = tracking_cal();
        let trials = 100_000;
        let estimates: Vec<f64> = (0..200)
            .map(|i| {
                let counts = draw(cal.config(), 0.58, trials, 11, i);
                estimate_counts(&counts, cal, &tracking_branch(), Objective::LeastSquares).unwrap().phi_est
            })
            .collect();
        let ratio = sample_std(&estimates) / crlb(cal, 0.58, trials).unwrap();
        assert!((ratio - 1.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn estimator_is_consistent() {
        let cal = tracking_cal();
        let trials = 1_000_000;
        for (n, phi) in [0.2, 0.4, 0.58].into_iter().enumerate() {
            let estimates: Vec<f64> = (0..200)
                .map(|i| {
                    let counts = draw(cal.config(), phi, trials, 5 + n as u64, i);
                    estimate_counts(&counts, cal, &tracking_branch(), Objective::LeastSquares).unwrap().phi_est
                })
                .collect();
            let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
            let sd = sample_std(&estimates);
            assert!((mean - phi).abs() < sd / 5.0, "φ={phi}: bias {} vs σ {sd}", mean - phi);
        }
    }

    #[test]
    fn bootstrap_behaviour() {
        let cal = tracking_cal();
        let branch = tracking_branch();
        let counts = draw(cal.config(), 0.58, 100_000, 3, 0);
        let a = bootstrap_sigma(&counts, cal, &branch, 200, 42, Objective::LeastSquares).unwrap();
        let b = bootstrap_sigma(&counts, cal, &branch, 200, 42, Objective::LeastSquares).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let bound = crlb(cal, 0.58, 100_000).unwrap();
        assert!((a / bound - 1.0).abs() < 0.2, "{a} vs {bound}");

        let exact = cal.probabilities(0.58).map(|p| (p * 1e8).round() as u64);
        let tiny = bootstrap_sigma(&exact, cal, &branch, 100, 0, Objective::LeastSquares).unwrap();
        assert!(tiny < 1e-4, "{tiny}");

        assert!(matches!(
            bootstrap_sigma(&[5000, 0, 0, 0], cal, &branch, 100, 0, Objective::LeastSquares),
            Err(Error::Unidentifiable(_))
        ));
        assert!(bootstrap_sigma(&counts, cal, &branch, 50, 0, Objective::LeastSquares).is_err());
        assert!(bootstrap_sigma(&[100, 100, 100, 100], cal, &branch, 100, 0, Objective::LeastSquares).is_err());
    }

    fn synthetic(cfg: &InterferometerConfig, trials: u64, seed: u64) -> Vec<CalibrationSample> {
        (0..37)
            .map(|k| {
                let phi = k as f64 * PI / 36.0;
                CalibrationSample { phi, counts: draw(cfg, phi, trials, seed, k) }
            })
            .collect()
    }

    #[test]
    fn calibration_round_trip() {
        let truth = InterferometerConfig { overlap: 0.99, phase_offset: 0.3, ..InterferometerConfig::symmetric(0.5, 0.8) };
        let samples = synthetic(&truth, 10_000_000, 21);
        let initial = InterferometerConfig { r1: 0.45, r2: 0.55, eta_h: 0.75, eta_v: 0.85, overlap: 0.97, phase_offset: 0.25, ..truth };
        let cal = calibrate(&samples, &initial).unwrap();
        let p = cal.params();
        assert!((p.r1 - 0.5).abs() < 0.01 && p.r1 == p.r2, "{p:?}");
        assert!((p.phase_offset - 0.3).abs() < 0.01, "{p:?}");
        assert!(!cal.degraded());
        assert!(cal.evaluations() <= MAX_CALIBRATION_EVALUATIONS);
        assert!(cal.fit_residual() < 1e-5);
    }

    #[test]
    fn untied_fit_reproduces_curves() {
        let truth = InterferometerConfig { overlap: 0.99, phase_offset: 0.3, ..InterferometerConfig::symmetric(0.5, 0.8) };
        let samples = synthetic(&truth, 10_000_000, 21);
        let initial = InterferometerConfig { r1: 0.45, r2: 0.55, eta_h: 0.75, eta_v: 0.85, overlap: 0.97, phase_offset: 0.25, ..truth };
        let options = CalibrationOptions { tie_squeezing: false, ..Default::default() };
        let cal = calibrate_with(&samples, &initial, &options).unwrap();
        let exact = CalibrationModel::with_points(&truth, 64).unwrap();
        for k in 0..64 {
            let phi = k as f64 * PI / 64.0;
            let (a, b) = (cal.probabilities(phi), exact.probabilities(phi));
            for j in 0..4 {
                assert!((a[j] - b[j]).abs() < 5e-4, "φ={phi}: {a:?} vs {b:?}");
            }
        }
        let p = cal.params();
        assert!((p.r1 + p.r2 - 1.0).abs() < 0.02, "{p:?}");
    }

    #[test]
    fn calibration_of_ideal_data_finds_unit_efficiency() {
        let truth = InterferometerConfig::ideal(0.4);
        let samples = synthetic(&truth, 10_000_000, 4);
        let initial = InterferometerConfig { eta_h: 0.9, eta_v: 0.9, r1: 0.42, r2: 0.38, ..truth };
        let p = calibrate(&samples, &initial).unwrap().params();
        assert!((p.eta_h - 1.0).abs() < 0.005 && (p.eta_v - 1.0).abs() < 0.005, "{p:?}");
    }

    #[test]
    fn calibration_preconditions() {
        let cfg = InterferometerConfig::ideal(0.4);
        let single = vec![CalibrationSample { phi: 0.3, counts: [10, 10, 10, 10] }; 10];
        assert!(matches!(calibrate(&single, &cfg), Err(Error::Precondition(_))));
        let narrow: Vec<_> =
            (0..10).map(|k| CalibrationSample { phi: 0.1 * k as f64, counts: [10, 10, 10, 10] }).collect();
        assert!(matches!(calibrate(&narrow, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let truth = InterferometerConfig::symmetric(0.5, 0.8);
        let samples = synthetic(&truth, 1_000_000, 2);
        let options = CalibrationOptions { max_evaluations: 20, tabulation_points: 64, ..Default::default() };
        let cal = calibrate_with(&samples, &InterferometerConfig::symmetric(0.4, 0.7), &options).unwrap();
        assert!(cal.degraded());
        assert!(cal.evaluations() <= 20);
    }

    #[test]
    fn json_round_trip_rebuilds_curves() {
        let cal = CalibrationModel::with_points(&InterferometerConfig::measured_tracking().unwrap(), 512).unwrap();
        let text = cal.to_json().unwrap();
        let back = CalibrationModel::from_json(&text).unwrap();
        assert_eq!(back.params(), cal.params());
        assert_eq!(back.curves, cal.curves);
        assert!(CalibrationModel::from_json(&text.replace("\"format_version\": 1", "\"format_version\": 9")).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn estimates_stay_in_branch(
            w in proptest::array::uniform4(0.0f64..1.0),
            lo in 0.0f64..2.0,
            width in 0.05f64..FRAC_PI_2,
        ) {
            let total: f64 = w.iter().sum::<f64>() + 1e-9;
            let observed = ClickDistribution::from_array(w.map(|x| (x + 1e-9 / 4.0) / total)).unwrap();
            let hi = (lo + width).min(PI);
            let branch = Branch::new(lo, hi).unwrap();
            let est = estimate_phase(&observed, tracking_cal(), &branch, Objective::LeastSquares).unwrap();
            prop_assert!(branch.contains(est.phi_est));
            prop_assert!(est.sigma >= 0.0);
        }
    }
}
