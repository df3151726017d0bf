//! Physical model parameters of the two-squeezer interferometer.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};

/// Squeezing parameter used for the fringe and Fisher-information scans.
pub const MEASURED_FRINGE_SQUEEZING: f64 = 0.59;
/// Squeezing parameter used for the real-time tracking run.
pub const MEASURED_TRACKING_SQUEEZING: f64 = 0.43;
/// Calibrated system efficiencies of the horizontal and vertical arms.
pub const MEASURED_EFFICIENCY_H: f64 = 0.744;
pub const MEASURED_EFFICIENCY_V: f64 = 0.751;
/// Measured visibility of the coincidence fringe.
pub const MEASURED_VISIBILITY: f64 = 0.966;
/// Offset that places the dark fringe at φ = π/4, between the reported
/// optimal phases 0.67 and 0.90.
pub const MEASURED_PHASE_OFFSET: f64 = FRAC_PI_4;

/// Full parameter set of the interferometer model.
///
/// Squeezer 1 acts on the matched pair (a, b), followed by the internal
/// loss, the phase, and squeezer 2 acting on the rotated modes
/// `ξ a + √(1-ξ²) a'`, `ξ b + √(1-ξ²) b'`. External losses act last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerConfig {
    pub r1: f64,
    pub r2: f64,
    pub eta_h: f64,
    pub eta_v: f64,
    pub eta_internal: f64,
    /// Amplitude overlap ξ between the seed and the second squeezing process.
    pub overlap: f64,
    /// Constant phase bias added to every requested phase (rad).
    pub phase_offset: f64,
    /// Shot-noise Fisher information per photon through the sample (rad⁻²).
    pub snl_per_photon: f64,
    /// Dark-count probability per trial of each detector.
    pub dark_count_h: f64,
    pub dark_count_v: f64,
    /// Whether the mismatched ancilla modes reach the detectors.
    pub ancilla_detected: bool,
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self::ideal(MEASURED_FRINGE_SQUEEZING)
    }
}

impl InterferometerConfig {
    /// Lossless, perfectly mode-matched, symmetric configuration.
    pub fn ideal(r: f64) -> Self {
        Self {
            r1: r,
            r2: r,
            eta_h: 1.0,
            eta_v: 1.0,
            eta_internal: 1.0,
            overlap: 1.0,
            phase_offset: 0.0,
            snl_per_photon: 2.0,
            dark_count_h: 0.0,
            dark_count_v: 0.0,
            ancilla_detected: true,
        }
    }

    /// Symmetric gains with equal external efficiency on both arms.
    pub fn symmetric(r: f64, eta: f64) -> Self {
        Self { eta_h: eta, eta_v: eta, ..Self::ideal(r) }
    }

    /// Parameters of the fringe scan: r = 0.59, measured arm efficiencies,
    /// overlap solved so the coincidence fringe has 96.6 % visibility.
    pub fn measured_fringes() -> Result<Self> {
        let base = Self {
            eta_h: MEASURED_EFFICIENCY_H,
            eta_v: MEASURED_EFFICIENCY_V,
            phase_offset: MEASURED_PHASE_OFFSET,
            ..Self::ideal(MEASURED_FRINGE_SQUEEZING)
        };
        crate::detection::calibrate_overlap(&base, MEASURED_VISIBILITY)
    }

    /// Parameters of the tracking run: r = 0.43, η = 0.75 on both arms,
    /// overlap solved for 96.6 % visibility.
    pub fn measured_tracking() -> Result<Self> {
        let base = Self {
            phase_offset: MEASURED_PHASE_OFFSET,
            ..Self::symmetric(MEASURED_TRACKING_SQUEEZING, 0.75)
        };
        crate::detection::calibrate_overlap(&base, MEASURED_VISIBILITY)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("phase_offset", self.phase_offset),
            ("snl_per_photon", self.snl_per_photon),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} = {value} is not finite")));
            }
        }
        if self.r1 < 0.0 || self.r2 < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "squeezing parameters must be non-negative (r1 = {}, r2 = {})",
                self.r1, self.r2
            )));
        }
        if self.snl_per_photon < 0.0 {
            return Err(Error::InvalidConfig("snl_per_photon must be non-negative".into()));
        }
        for (name, value) in [
            ("eta_h", self.eta_h),
            ("eta_v", self.eta_v),
            ("eta_internal", self.eta_internal),
            ("overlap", self.overlap),
            ("dark_count_h", self.dark_count_h),
            ("dark_count_v", self.dark_count_v),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidConfig(format!("{name} = {value} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Upper bound on the total squeezing seen by any mode, used to size
    /// Fock-space truncations.
    pub fn total_squeezing(&self) -> f64 {
        self.r1 + self.r2
    }

    /// Rotation angle θ with cos θ = ξ describing the mode mismatch.
    pub fn mismatch_angle(&self) -> f64 {
        self.overlap.clamp(0.0, 1.0).acos()
    }
}
