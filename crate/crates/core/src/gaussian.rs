//! Zero-mean multimode Gaussian states in the covariance-matrix picture.
//!
//! Quadratures are interleaved as `(x₁, p₁, x₂, p₂, …)` with `a = (x + i p)/√2`,
//! so the vacuum covariance is `I/2`. Every operation returns a new state; the
//! symplectic maps are the Heisenberg-picture actions of
//!
//! * two-mode squeezer `exp(r(a b − a† b†))`: `a → a cosh r − b† sinh r`,
//! * phase shift `exp(i φ a† a)`: `a → a e^{iφ}`,
//! * beam splitter `exp(θ(a† c − a c†))`: `a → a cos θ + c sin θ`,
//!
//! and loss is the pure-loss channel `σ → X σ X + (1 − η)/2` on one mode.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::InterferometerConfig;
use crate::error::{ensure_finite, ensure_unit_interval, Error, Result};

/// Matched signal mode of the horizontal arm.
pub const MODE_A: usize = 0;
/// Matched signal mode of the vertical arm.
pub const MODE_B: usize = 1;
/// Mismatched companion of [`MODE_A`].
pub const MODE_A_ANCILLA: usize = 2;
/// Mismatched companion of [`MODE_B`].
pub const MODE_B_ANCILLA: usize = 3;
/// Number of modes of the interferometer model.
pub const INTERFEROMETER_MODES: usize = 4;

const SYMMETRY_TOL: f64 = 1e-12;
const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    num_modes: usize,
    covariance: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidArgument("a Gaussian state needs at least one mode".into()));
        }
        Ok(Self {
            num_modes,
            covariance: DMatrix::identity(2 * num_modes, 2 * num_modes) * 0.5,
        })
    }

    /// Wraps an externally supplied covariance after checking symmetry and
    /// the uncertainty principle.
    pub fn from_covariance(covariance: DMatrix<f64>) -> Result<Self> {
        let dim = covariance.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || covariance.ncols() != dim {
            return Err(Error::InvalidState(format!(
                "covariance must be a non-empty square matrix of even size, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let scale = covariance.amax().max(1.0);
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidState(format!("covariance is not symmetric (max |σ − σᵀ| = {asym:.3e})")));
        }
        let state = Self { num_modes: dim / 2, covariance };
        let min_eig = state.uncertainty_min_eigenvalue()?;
        if min_eig < -PHYSICALITY_TOL {
            return Err(Error::InvalidState(format!(
                "σ + iΩ/2 has eigenvalue {min_eig:.3e} < 0"
            )));
        }
        Ok(state)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.num_modes {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "mode {mode} out of range for a {}-mode state",
                self.num_modes
            )))
        }
    }

    fn check_subset(&self, modes: &[usize]) -> Result<()> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument("mode subset is empty".into()));
        }
        for (k, &m) in modes.iter().enumerate() {
            self.check_mode(m)?;
            if modes[..k].contains(&m) {
                return Err(Error::InvalidArgument(format!("mode {m} listed twice")));
            }
        }
        Ok(())
    }

    fn conjugate(&self, map: &DMatrix<f64>) -> Self {
        let covariance = map * &self.covariance * map.transpose();
        // re-symmetrize so rounding never accumulates into asymmetry
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        Self { num_modes: self.num_modes, covariance }
    }

    pub fn apply_two_mode_squeezer(&self, i: usize, j: usize, r: f64) -> Result<Self> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(Error::InvalidArgument("two-mode squeezer needs two distinct modes".into()));
        }
        ensure_finite(r, "squeezing parameter")?;
        let (c, s) = (r.cosh(), r.sinh());
        let mut map = DMatrix::identity(2 * self.num_modes, 2 * self.num_modes);
        let (xi, pi, xj, pj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        map[(xi, xi)] = c;
        map[(xi, xj)] = -s;
        map[(pi, pi)] = c;
        map[(pi, pj)] = s;
        map[(xj, xj)] = c;
        map[(xj, xi)] = -s;
        map[(pj, pj)] = c;
        map[(pj, pi)] = s;
        Ok(self.conjugate(&map))
    }

    pub fn apply_phase(&self, modes: &[usize], phi: f64) -> Result<Self> {
        self.check_subset(modes)?;
        ensure_finite(phi, "phase")?;
        let (c, s) = (phi.cos(), phi.sin());
        let mut map = DMatrix::identity(2 * self.num_modes, 2 * self.num_modes);
        for &m in modes {
            let (x, p) = (2 * m, 2 * m + 1);
            map[(x, x)] = c;
            map[(x, p)] = -s;
            map[(p, x)] = s;
            map[(p, p)] = c;
        }
        Ok(self.conjugate(&map))
    }

    /// Passive mixing of modes `i` and `j`; `theta = acos ξ` moves a fraction
    /// `1 − ξ²` of mode `i` into mode `j`.
    pub fn apply_beamsplitter(&self, i: usize, j: usize, theta: f64) -> Result<Self> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(Error::InvalidArgument("beam splitter needs two distinct modes".into()));
        }
        ensure_finite(theta, "beam-splitter angle")?;
        let (c, s) = (theta.cos(), theta.sin());
        let mut map = DMatrix::identity(2 * self.num_modes, 2 * self.num_modes);
        for q in 0..2 {
            let (u, v) = (2 * i + q, 2 * j + q);
            map[(u, u)] = c;
            map[(u, v)] = s;
            map[(v, v)] = c;
            map[(v, u)] = -s;
        }
        Ok(self.conjugate(&map))
    }

    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        ensure_unit_interval(eta, "efficiency")?;
        let dim = 2 * self.num_modes;
        let root = eta.sqrt();
        let mut covariance = self.covariance.clone();
        for row in 0..dim {
            for col in 0..dim {
                let scale_row = if row / 2 == mode { root } else { 1.0 };
                let scale_col = if col / 2 == mode { root } else { 1.0 };
                covariance[(row, col)] *= scale_row * scale_col;
            }
        }
        covariance[(2 * mode, 2 * mode)] += 0.5 * (1.0 - eta);
        covariance[(2 * mode + 1, 2 * mode + 1)] += 0.5 * (1.0 - eta);
        Ok(Self { num_modes: self.num_modes, covariance })
    }

    /// Mean photon number summed over `modes`.
    pub fn mean_photon(&self, modes: &[usize]) -> Result<f64> {
        self.check_subset(modes)?;
        Ok(modes
            .iter()
            .map(|&m| 0.5 * (self.covariance[(2 * m, 2 * m)] + self.covariance[(2 * m + 1, 2 * m + 1)] - 1.0))
            .sum())
    }

    /// Covariance of the reduced state on `modes`, in the order given.
    pub fn reduced_covariance(&self, modes: &[usize]) -> Result<DMatrix<f64>> {
        self.check_subset(modes)?;
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        Ok(DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.covariance[(idx[r], idx[c])]))
    }

    /// `1/√det(2σ)`; equals one for pure states.
    pub fn purity(&self) -> f64 {
        1.0 / (&self.covariance * 2.0).determinant().sqrt()
    }

    /// Smallest eigenvalue of the Hermitian matrix `σ + iΩ/2`.
    pub fn uncertainty_min_eigenvalue(&self) -> Result<f64> {
        let dim = 2 * self.num_modes;
        let omega = symplectic_form(self.num_modes);
        let h = DMatrix::from_fn(dim, dim, |r, c| {
            Complex64::new(self.covariance[(r, c)], 0.5 * omega[(r, c)])
        });
        let eig = h.symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        ensure_finite(min, "uncertainty eigenvalue")
    }

    /// Symplectic eigenvalues in ascending order (one per mode).
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let dim = 2 * self.num_modes;
        let eig = self.covariance.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidState("covariance is not positive definite".into()));
        }
        let sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let kernel = &sqrt * symplectic_form(self.num_modes) * &sqrt;
        let h = DMatrix::from_fn(dim, dim, |r, c| Complex64::new(0.0, kernel[(r, c)]));
        let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().filter(|&v| v > 0.0).collect();
        values.sort_by(f64::total_cmp);
        if values.len() != self.num_modes {
            return Err(Error::InvalidState("symplectic spectrum is degenerate".into()));
        }
        Ok(values)
    }
}

/// Block-diagonal symplectic form with `[[0, 1], [−1, 0]]` blocks.
pub fn symplectic_form(num_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * num_modes, 2 * num_modes);
    for m in 0..num_modes {
        omega[(2 * m, 2 * m + 1)] = 1.0;
        omega[(2 * m + 1, 2 * m)] = -1.0;
    }
    omega
}

/// Two-mode squeezed vacuum `S(r)|0,0⟩`.
pub fn tmss(r: f64) -> Result<GaussianState> {
    GaussianState::vacuum(2)?.apply_two_mode_squeezer(0, 1, r)
}

/// Output state of the interferometer at phase `phi` (before detection).
///
/// Returns the four-mode state with modes [`MODE_A`], [`MODE_B`],
/// [`MODE_A_ANCILLA`] and [`MODE_B_ANCILLA`]; the external efficiencies are
/// already applied to each arm.
pub fn build_interferometer(cfg: &InterferometerConfig, phi: f64) -> Result<GaussianState> {
    cfg.validate()?;
    ensure_finite(phi, "phase")?;
    let theta = cfg.mismatch_angle();
    let state = GaussianState::vacuum(INTERFEROMETER_MODES)?
        .apply_two_mode_squeezer(MODE_A, MODE_B, cfg.r1)?
        .apply_loss(MODE_A, cfg.eta_internal)?
        .apply_loss(MODE_B, cfg.eta_internal)?
        .apply_phase(&[MODE_A, MODE_B, MODE_A_ANCILLA, MODE_B_ANCILLA], phi + cfg.phase_offset)?
        .apply_beamsplitter(MODE_A, MODE_A_ANCILLA, theta)?
        .apply_beamsplitter(MODE_B, MODE_B_ANCILLA, theta)?
        .apply_two_mode_squeezer(MODE_A, MODE_B, cfg.r2)?
        .apply_loss(MODE_A, cfg.eta_h)?
        .apply_loss(MODE_A_ANCILLA, cfg.eta_h)?
        .apply_loss(MODE_B, cfg.eta_v)?
        .apply_loss(MODE_B_ANCILLA, cfg.eta_v)?;
    Ok(state)
}
