//! Threshold-detector click statistics of zero-mean Gaussian states.
//!
//! The no-click probability of a set of modes is the vacuum overlap of their
//! reduced state, `1/√det(σ_S + I/2)`. The four outcome probabilities follow
//! by inclusion–exclusion over the two detectors.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::config::InterferometerConfig;
use crate::error::{ensure_unit_interval, Error, Result};
use crate::gaussian::{build_interferometer, GaussianState, MODE_A, MODE_A_ANCILLA, MODE_B, MODE_B_ANCILLA};

const CLAMP_TOL: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-10;

/// Outcome probabilities of the two threshold detectors. The first index
/// refers to the horizontal detector, the second to the vertical one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickDistribution {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl ClickDistribution {
    /// Validates the probabilities, clamping floating-point noise of up to
    /// 1e-12 outside `[0, 1]`.
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        Self::from_array([p00, p01, p10, p11])
    }

    pub fn from_array(values: [f64; 4]) -> Result<Self> {
        let mut clamped = [0.0; 4];
        for (slot, &p) in clamped.iter_mut().zip(values.iter()) {
            if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&p) {
                return Err(Error::InvalidState(format!("outcome probability {p:.3e} outside [0, 1]")));
            }
            *slot = p.clamp(0.0, 1.0);
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidState(format!("outcome probabilities sum to {total}")));
        }
        let [p00, p01, p10, p11] = clamped;
        Ok(Self { p00, p01, p10, p11 })
    }

    /// Probabilities in the order `[p00, p01, p10, p11]`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

/// Assignment of state modes to the two physical detectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmAssignment {
    arm_h: Vec<usize>,
    arm_v: Vec<usize>,
}

impl ArmAssignment {
    pub fn new(arm_h: Vec<usize>, arm_v: Vec<usize>) -> Result<Self> {
        if arm_h.is_empty() || arm_v.is_empty() {
            return Err(Error::InvalidArgument("each detector needs at least one mode".into()));
        }
        if arm_h.iter().any(|m| arm_v.contains(m)) {
            return Err(Error::InvalidArgument("detector arms must be disjoint".into()));
        }
        Ok(Self { arm_h, arm_v })
    }

    /// Arms of the interferometer model: each detector sees its matched
    /// mode and, when `ancilla_detected`, the mismatched companion.
    pub fn for_config(cfg: &InterferometerConfig) -> Self {
        if cfg.ancilla_detected {
            Self { arm_h: vec![MODE_A, MODE_A_ANCILLA], arm_v: vec![MODE_B, MODE_B_ANCILLA] }
        } else {
            Self { arm_h: vec![MODE_A], arm_v: vec![MODE_B] }
        }
    }

    pub fn arm_h(&self) -> &[usize] {
        &self.arm_h
    }

    pub fn arm_v(&self) -> &[usize] {
        &self.arm_v
    }

    pub fn union(&self) -> Vec<usize> {
        self.arm_h.iter().chain(self.arm_v.iter()).copied().collect()
    }
}

/// Probability that every mode in `modes` is empty.
pub fn vacuum_probability(state: &GaussianState, modes: &[usize]) -> Result<f64> {
    let sub = state.reduced_covariance(modes)?;
    let dim = sub.nrows();
    let det = (sub + nalgebra::DMatrix::identity(dim, dim) * 0.5).determinant();
    if !det.is_finite() || det <= 0.0 {
        return Err(Error::InvalidState(format!("det(σ + I/2) = {det:.3e} on modes {modes:?}")));
    }
    let p = 1.0 / det.sqrt();
    if p > 1.0 + CLAMP_TOL {
        return Err(Error::InvalidState(format!("vacuum probability {p} exceeds one")));
    }
    Ok(p.min(1.0))
}

/// Assembles the four outcomes from the no-click probabilities of the
/// horizontal arm, the vertical arm, and both together.
pub(crate) fn outcomes_from_no_click(none_h: f64, none_v: f64, none_both: f64) -> Result<ClickDistribution> {
    ClickDistribution::new(
        none_both,
        none_h - none_both,
        none_v - none_both,
        1.0 - none_h - none_v + none_both,
    )
}

pub fn click_distribution(state: &GaussianState, arms: &ArmAssignment) -> Result<ClickDistribution> {
    click_distribution_with_dark_counts(state, arms, 0.0, 0.0)
}

/// Click statistics when each detector additionally fires spuriously with
/// probability `dark_h` / `dark_v`, independently of the light.
pub fn click_distribution_with_dark_counts(
    state: &GaussianState,
    arms: &ArmAssignment,
    dark_h: f64,
    dark_v: f64,
) -> Result<ClickDistribution> {
    let quiet_h = 1.0 - ensure_unit_interval(dark_h, "dark-count probability")?;
    let quiet_v = 1.0 - ensure_unit_interval(dark_v, "dark-count probability")?;
    let none_both = vacuum_probability(state, &arms.union())?;
    let none_h = vacuum_probability(state, arms.arm_h())?;
    let none_v = vacuum_probability(state, arms.arm_v())?;
    outcomes_from_no_click(quiet_h * none_h, quiet_v * none_v, quiet_h * quiet_v * none_both)
}

/// Click statistics of the full interferometer model at phase `phi`.
pub fn click_model(cfg: &InterferometerConfig, phi: f64) -> Result<ClickDistribution> {
    let state = build_interferometer(cfg, phi)?;
    click_distribution_with_dark_counts(&state, &ArmAssignment::for_config(cfg), cfg.dark_count_h, cfg.dark_count_v)
}

/// `(max − min)/(max + min)` of a sampled fringe.
pub fn fringe_visibility(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Precondition("visibility needs at least two samples".into()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min <= 0.0 {
        return Ok(0.0);
    }
    Ok((max - min) / (max + min))
}

/// Visibility of the coincidence fringe `p11(φ)` of the model.
///
/// `p11` is even in the total phase and has period π, so its extrema sit at
/// total phase 0 and π/2.
pub fn model_visibility(cfg: &InterferometerConfig) -> Result<f64> {
    let bright = click_model(cfg, -cfg.phase_offset)?.p11;
    let dark = click_model(cfg, FRAC_PI_2 - cfg.phase_offset)?.p11;
    fringe_visibility(&[bright, dark])
}

/// Solves for the overlap ξ that gives the coincidence fringe the requested
/// visibility, keeping every other parameter of `base`.
pub fn calibrate_overlap(base: &InterferometerConfig, target_visibility: f64) -> Result<InterferometerConfig> {
    ensure_unit_interval(target_visibility, "target visibility")?;
    let visibility_at = |overlap: f64| model_visibility(&InterferometerConfig { overlap, ..*base });
    let (mut lo, mut hi) = (0.0, 1.0);
    let (v_lo, v_hi) = (visibility_at(lo)?, visibility_at(hi)?);
    if !(v_lo <= target_visibility && target_visibility <= v_hi) {
        return Err(Error::Bracket { lo, hi, f_lo: v_lo - target_visibility, f_hi: v_hi - target_visibility });
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if visibility_at(mid)? < target_visibility {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(InterferometerConfig { overlap: 0.5 * (lo + hi), ..*base })
}
