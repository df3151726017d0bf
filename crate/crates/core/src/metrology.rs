//! Fisher information of the four-outcome measurement, shot-noise and NOON
//! baselines, and loss thresholds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::InterferometerConfig;
use crate::detection::{click_model, ClickDistribution};
use crate::error::{Error, Result};
use crate::optimize::{bisect, grid_then_golden_min};

/// Default central-difference step (rad).
pub const DEFAULT_STEP: f64 = 1e-4;
/// Outcome probabilities below this are treated as removable zeros.
pub const PROBABILITY_GUARD: f64 = 1e-12;
/// Coarse grid over one fringe period used by the optimum search.
pub const OPTIMUM_GRID_POINTS: usize = 721;
/// Bisection tolerance in efficiency for the numeric threshold.
pub const THRESHOLD_TOL: f64 = 1e-4;
/// Final bracket width of the optimum search (rad).
pub const OPTIMUM_TOL: f64 = 1e-6;

/// Which photons count as having passed the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhotonAccounting {
    /// The first-pass two-mode squeezed vacuum crosses the sample once:
    /// `n̄ = 2 sinh² r1`.
    #[default]
    SinglePass,
    /// The first-pass light crosses the sample twice: `n̄ = 4 sinh² r1`.
    DoublePass,
}

impl PhotonAccounting {
    pub fn photons_through_sample(self, cfg: &InterferometerConfig) -> f64 {
        let single = mean_photons_ideal(cfg.r1);
        match self {
            PhotonAccounting::SinglePass => single,
            PhotonAccounting::DoublePass => 2.0 * single,
        }
    }
}

impl std::str::FromStr for PhotonAccounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-pass" => Ok(Self::SinglePass),
            "double-pass" => Ok(Self::DoublePass),
            other => Err(Error::InvalidArgument(format!("unknown accounting `{other}`"))),
        }
    }
}

/// Fisher information at one phase, with per-photon normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub phi: f64,
    pub fisher_per_trial: f64,
    pub mean_photons_through_sample: f64,
    pub fisher_per_photon: f64,
    pub snl_per_photon: f64,
    pub enhancement_db: f64,
}

impl FisherReport {
    pub fn new(phi: f64, fisher_per_trial: f64, photons: f64, snl_per_photon: f64) -> Self {
        let fisher_per_photon = if photons > 0.0 { fisher_per_trial / photons } else { 0.0 };
        Self {
            phi,
            fisher_per_trial,
            mean_photons_through_sample: photons,
            fisher_per_photon,
            snl_per_photon,
            enhancement_db: 10.0 * (fisher_per_photon / snl_per_photon).log10(),
        }
    }
}

/// `2 sinh² r`, the mean photon number of a two-mode squeezed vacuum.
pub fn mean_photons_ideal(r: f64) -> f64 {
    2.0 * r.sinh().powi(2)
}

/// Classical Fisher information per trial of the click measurement,
/// `Σ (∂p/∂φ)² / p`, from central differences with step `h`.
///
/// An outcome with `p < 1e-12` sits at a double zero of its curve; its term
/// is replaced by the limit `2 ∂²p/∂φ²`.
pub fn fisher_per_trial<F>(model: F, phi: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<ClickDistribution>,
{
    if !(h > 0.0 && h <= 0.01) {
        return Err(Error::InvalidArgument(format!("step h = {h} must lie in (0, 0.01]")));
    }
    let centre = model(phi)?.as_array();
    let plus = model(phi + h)?.as_array();
    let minus = model(phi - h)?.as_array();
    let mut fisher = 0.0;
    for k in 0..4 {
        let term = if centre[k] >= PROBABILITY_GUARD {
            let slope = (plus[k] - minus[k]) / (2.0 * h);
            slope * slope / centre[k]
        } else {
            2.0 * ((plus[k] - 2.0 * centre[k] + minus[k]) / (h * h)).max(0.0)
        };
        fisher += term;
    }
    if !fisher.is_finite() {
        return Err(Error::NonFinite(format!("Fisher information at φ = {phi}")));
    }
    if fisher < -1e-6 {
        return Err(Error::InvalidState(format!("negative Fisher information {fisher}")));
    }
    Ok(fisher.max(0.0))
}

/// Phase in `[0, π]` maximizing the Fisher information of `model`, found by
/// a 721-point scan refined with golden-section search.
pub fn optimal_phase<F>(model: F, h: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<ClickDistribution>,
{
    let (phi, neg) = grid_then_golden_min(
        |phi| fisher_per_trial(&model, phi, h).map(|f| -f),
        0.0,
        PI,
        OPTIMUM_GRID_POINTS,
        OPTIMUM_TOL,
    )?;
    Ok((phi, -neg))
}

/// Largest Fisher information per trial of the ideal interferometer,
/// `4 sinh²(2r)`.
pub fn fisher_max_ideal(r: f64) -> f64 {
    4.0 * (2.0 * r).sinh().powi(2)
}

/// Single-trial phase uncertainty `1/(2√(n̄(n̄+2)))` of the ideal scheme.
pub fn heisenberg_sensitivity(n_bar: f64) -> Result<f64> {
    if !(n_bar > 0.0) || !n_bar.is_finite() {
        return Err(Error::InvalidArgument(format!("mean photon number {n_bar} must be positive")));
    }
    Ok(1.0 / (2.0 * (n_bar * (n_bar + 2.0)).sqrt()))
}

/// Detection efficiency below which the scheme no longer beats the shot-noise
/// limit, `1 − √(1 − 1/(2(n̄+2)))`.
pub fn threshold_tm(n_bar: f64) -> Result<f64> {
    if !(n_bar >= 0.0) || !n_bar.is_finite() {
        return Err(Error::InvalidArgument(format!("mean photon number {n_bar} must be non-negative")));
    }
    Ok(1.0 - (1.0 - 1.0 / (2.0 * (n_bar + 2.0))).sqrt())
}

/// Finds the external efficiency at which the best Fisher information per
/// photon equals the shot-noise value, by bisection on a symmetric, perfectly
/// matched configuration with `n̄ = 2 sinh² r`.
///
/// Only `snl_per_photon` is taken from `base`.
pub fn threshold_tm_numeric(base: &InterferometerConfig, n_bar: f64) -> Result<f64> {
    if !(n_bar > 0.0) || !n_bar.is_finite() {
        return Err(Error::InvalidArgument(format!("mean photon number {n_bar} must be positive")));
    }
    let snl = base.snl_per_photon;
    if snl <= 0.0 {
        return Ok(0.0);
    }
    let r = (n_bar / 2.0).sqrt().asinh();
    let excess = |eta: f64| -> Result<f64> {
        let cfg = InterferometerConfig { snl_per_photon: snl, ..InterferometerConfig::symmetric(r, eta) };
        let (_, fisher) = optimal_phase(|phi| click_model(&cfg, phi), DEFAULT_STEP)?;
        Ok(fisher / n_bar - snl)
    };
    bisect(excess, 0.0, 1.0, THRESHOLD_TOL)
}

/// Ideal-fringe NOON Fisher information per photon through the sample,
/// `N² η^N / (N/2) = 2N η^N`.
pub fn noon_fisher_per_photon(n: u32, eta: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("NOON photon number must be at least 1".into()));
    }
    crate::error::ensure_unit_interval(eta, "efficiency")?;
    Ok(2.0 * n as f64 * eta.powi(n as i32))
}

/// Efficiency `(1/N)^{1/N}` at which an N-photon NOON state reaches the
/// shot-noise limit.
pub fn threshold_noon(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("NOON photon number must be at least 1".into()));
    }
    let n = n as f64;
    Ok((1.0 / n).powf(1.0 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoonBaseline {
    pub n: u32,
    pub eta: f64,
    pub fisher_per_photon: f64,
    pub threshold: f64,
}

impl NoonBaseline {
    pub fn new(n: u32, eta: f64) -> Result<Self> {
        Ok(Self { n, eta, fisher_per_photon: noon_fisher_per_photon(n, eta)?, threshold: threshold_noon(n)? })
    }
}

/// Fisher reports on a phase grid inside `[0, π]`.
pub fn fisher_sweep(
    cfg: &InterferometerConfig,
    phi_grid: &[f64],
    h: f64,
    accounting: PhotonAccounting,
) -> Result<Vec<FisherReport>> {
    cfg.validate()?;
    if let Some(bad) = phi_grid.iter().find(|phi| !(-1e-12..=PI + 1e-12).contains(*phi)) {
        return Err(Error::InvalidArgument(format!("phase {bad} outside [0, π]")));
    }
    let photons = accounting.photons_through_sample(cfg);
    phi_grid
        .par_iter()
        .map(|&phi| {
            let fisher = fisher_per_trial(|p| click_model(cfg, p), phi, h)?;
            Ok(FisherReport::new(phi, fisher, photons, cfg.snl_per_photon))
        })
        .collect()
}

/// Best Fisher report over the fringe period.
pub fn best_report(cfg: &InterferometerConfig, h: f64, accounting: PhotonAccounting) -> Result<FisherReport> {
    cfg.validate()?;
    let (phi, fisher) = optimal_phase(|p| click_model(cfg, p), h)?;
    Ok(FisherReport::new(phi, fisher, accounting.photons_through_sample(cfg), cfg.snl_per_photon))
}

/// Ideal single-trial sensitivities at equal photon number through the
/// sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_bar: f64,
    /// Two-squeezer scheme, `1/(2√(n̄(n̄+2)))`.
    pub delta_phi_tm: f64,
    /// Shot-noise limit, `1/√(F_SNL n̄)`.
    pub delta_phi_snl: f64,
    /// NOON state with `N = 2n̄` photons, `1/N`.
    pub delta_phi_noon: f64,
}

pub fn ideal_scaling(n_bar: f64, snl_per_photon: f64) -> Result<ScalingRow> {
    if !(snl_per_photon > 0.0) {
        return Err(Error::InvalidArgument("snl_per_photon must be positive".into()));
    }
    Ok(ScalingRow {
        n_bar,
        delta_phi_tm: heisenberg_sensitivity(n_bar)?,
        delta_phi_snl: 1.0 / (snl_per_photon * n_bar).sqrt(),
        delta_phi_noon: 1.0 / (2.0 * n_bar),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub n_bar: f64,
    pub eta_tm: f64,
    /// Numeric crossing point; absent for `n̄ = 0`.
    pub eta_tm_numeric: Option<f64>,
}

/// Closed-form and numeric thresholds over `n_bars`, computed in parallel.
pub fn threshold_table(base: &InterferometerConfig, n_bars: &[f64], numeric: bool) -> Result<Vec<ThresholdRow>> {
    n_bars
        .par_iter()
        .map(|&n_bar| {
            let eta_tm_numeric =
                if numeric && n_bar > 0.0 { Some(threshold_tm_numeric(base, n_bar)?) } else { None };
            Ok(ThresholdRow { n_bar, eta_tm: threshold_tm(n_bar)?, eta_tm_numeric })
        })
        .collect()
}

/// Best per-photon Fisher information as the squeezing is varied, all other
/// parameters taken from `base` (r1 = r2 = r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingRow {
    pub r: f64,
    pub n_bar: f64,
    pub phi_opt: f64,
    pub fisher_per_photon: f64,
    pub enhancement_db: f64,
}

pub fn squeezing_sweep(
    base: &InterferometerConfig,
    r_values: &[f64],
    h: f64,
    accounting: PhotonAccounting,
) -> Result<Vec<SqueezingRow>> {
    r_values
        .par_iter()
        .map(|&r| {
            let cfg = InterferometerConfig { r1: r, r2: r, ..*base };
            let best = best_report(&cfg, h, accounting)?;
            Ok(SqueezingRow {
                r,
                n_bar: best.mean_photons_through_sample,
                phi_opt: best.phi,
                fisher_per_photon: best.fisher_per_photon,
                enhancement_db: best.enhancement_db,
            })
        })
        .collect()
}
