//! Truncated Fock-space simulation of the interferometer.
//!
//! This is the brute-force reference for the Gaussian path: unitaries are
//! matrix exponentials of the truncated generators, loss is the
//! amplitude-damping Kraus sum, and detection uses photon-number projectors.
//! Mixed states are stored as a list of unnormalized Kraus branches
//! `ρ = Σ_k |v_k⟩⟨v_k|`, which keeps the lossy path linear in the branch
//! count instead of quadratic in the Hilbert-space dimension.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::InterferometerConfig;
use crate::detection::{click_model, outcomes_from_no_click, ClickDistribution};
use crate::error::{ensure_finite, ensure_unit_interval, Error, Result};
use crate::gaussian::{MODE_A, MODE_A_ANCILLA, MODE_B, MODE_B_ANCILLA};

/// Default bound on the neglected photon-number tail.
pub const DEFAULT_TRUNCATION_BUDGET: f64 = 1e-8;
const UNITARITY_TOL: f64 = 1e-10;
const ZERO_BRANCH: f64 = 1e-300;

/// Amplitudes `c_n = (−tanh r)^n / cosh r` of `S(r)|0,0⟩` on `|n,n⟩`.
pub fn tmss_amplitudes(r: f64, n_max: usize) -> Vec<f64> {
    let (t, norm) = (-r.tanh(), 1.0 / r.cosh());
    std::iter::successors(Some(norm), |c| Some(c * t)).take(n_max + 1).collect()
}

/// Weight `tanh(r)^{2(n_max+1)}` of the two-mode squeezed vacuum beyond the
/// truncation.
pub fn truncation_error_bound(r_total: f64, n_max: usize) -> f64 {
    r_total.abs().tanh().powi(2 * (n_max as i32 + 1))
}

/// Product basis of `num_modes` modes, each truncated at `n_max` photons.
/// Mode 0 is the most significant digit of the flat index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    num_modes: usize,
    n_max: usize,
}

impl FockSpace {
    pub fn new(num_modes: usize, n_max: usize) -> Result<Self> {
        if num_modes == 0 || n_max == 0 {
            return Err(Error::InvalidArgument("Fock space needs at least one mode and n_max ≥ 1".into()));
        }
        let dim = (n_max + 1).checked_pow(num_modes as u32);
        if dim.is_none_or(|d| d > 1 << 24) {
            return Err(Error::InvalidArgument(format!("Fock space {num_modes} modes × {n_max} photons is too large")));
        }
        Ok(Self { num_modes, n_max })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1).pow(self.num_modes as u32)
    }

    pub fn stride(&self, mode: usize) -> usize {
        (self.n_max + 1).pow((self.num_modes - 1 - mode) as u32)
    }

    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % (self.n_max + 1)
    }

    pub fn index(&self, occupations: &[usize]) -> usize {
        occupations.iter().fold(0, |acc, &n| acc * (self.n_max + 1) + n)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.num_modes {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("mode {mode} out of range for {} modes", self.num_modes)))
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    /// Two-mode flat indices `n_first * (n_max + 1) + n_second`.
    indices: Vec<usize>,
    unitary: DMatrix<Complex64>,
}

/// Unitary on a truncated two-mode space, stored as the exponentials of the
/// invariant blocks of its generator.
#[derive(Debug, Clone)]
pub struct TwoModeUnitary {
    n_max: usize,
    blocks: Vec<Block>,
}

impl TwoModeUnitary {
    /// `exp(K)` for a real antisymmetric generator given by its nonzero
    /// entries `(row, col, value)` on the two-mode basis.
    fn from_generator(n_max: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let dim = (n_max + 1) * (n_max + 1);
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(r, c, _) in entries {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for i in 0..dim {
            let root = find(&mut parent, i);
            members[root].push(i);
        }
        let mut local = vec![0usize; dim];
        let mut blocks = Vec::new();
        for indices in members.into_iter().filter(|m| !m.is_empty()) {
            for (k, &i) in indices.iter().enumerate() {
                local[i] = k;
            }
            let size = indices.len();
            if size == 1 {
                blocks.push(Block { indices, unitary: DMatrix::identity(1, 1) });
                continue;
            }
            // H = iK is Hermitian; exp(K) = exp(−iH) = V e^{−iΛ} V†
            let mut h = DMatrix::<Complex64>::zeros(size, size);
            for &(r, c, v) in entries {
                if indices.binary_search(&r).is_ok() {
                    h[(local[r], local[c])] = Complex64::new(0.0, v);
                }
            }
            let eig = nalgebra::linalg::SymmetricEigen::try_new(h, f64::EPSILON, 100_000)
                .ok_or_else(|| Error::Convergence(format!("block of size {size} did not diagonalize")))?;
            let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(0.0, -l).exp()));
            let unitary = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
            let defect = (unitary.adjoint() * &unitary - DMatrix::identity(size, size)).camax();
            if defect > UNITARITY_TOL {
                return Err(Error::Convergence(format!("unitarity defect {defect:.3e} in block of size {size}")));
            }
            blocks.push(Block { indices, unitary });
        }
        Ok(Self { n_max, blocks })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 1)
    }

    /// Dense matrix on the two-mode basis.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut dense = DMatrix::zeros(self.dim(), self.dim());
        for block in &self.blocks {
            for (r, &gr) in block.indices.iter().enumerate() {
                for (c, &gc) in block.indices.iter().enumerate() {
                    dense[(gr, gc)] = block.unitary[(r, c)];
                }
            }
        }
        dense
    }

    /// Image of the basis state `|n_first, n_second⟩`.
    pub fn column(&self, n_first: usize, n_second: usize) -> DVector<Complex64> {
        let target = n_first * (self.n_max + 1) + n_second;
        let mut out = DVector::zeros(self.dim());
        for block in &self.blocks {
            if let Ok(c) = block.indices.binary_search(&target) {
                for (r, &gr) in block.indices.iter().enumerate() {
                    out[gr] = block.unitary[(r, c)];
                }
            }
        }
        out
    }

    /// Largest entry of `U†U − I` over the whole truncated space.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b.unitary.adjoint() * &b.unitary - DMatrix::identity(b.indices.len(), b.indices.len())).camax())
            .fold(0.0, f64::max)
    }
}

/// Truncated `exp(r(a b − a† b†))`.
pub fn squeezer_unitary(r: f64, n_max: usize) -> Result<TwoModeUnitary> {
    ensure_finite(r, "squeezing parameter")?;
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let d = n_max + 1;
    let mut entries = Vec::new();
    for na in 0..n_max {
        for nb in 0..n_max {
            let amp = r * (((na + 1) * (nb + 1)) as f64).sqrt();
            let (lo, hi) = (na * d + nb, (na + 1) * d + nb + 1);
            entries.push((hi, lo, -amp));
            entries.push((lo, hi, amp));
        }
    }
    TwoModeUnitary::from_generator(n_max, &entries)
}

/// Truncated `exp(θ(a† c − a c†))`.
pub fn beamsplitter_unitary(theta: f64, n_max: usize) -> Result<TwoModeUnitary> {
    ensure_finite(theta, "beam-splitter angle")?;
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let d = n_max + 1;
    let mut entries = Vec::new();
    for na in 0..n_max {
        for nc in 1..=n_max {
            // a† c |na, nc⟩ = √((na+1) nc) |na+1, nc−1⟩
            let amp = theta * (((na + 1) * nc) as f64).sqrt();
            let (from, to) = (na * d + nc, (na + 1) * d + nc - 1);
            entries.push((to, from, amp));
            entries.push((from, to, -amp));
        }
    }
    TwoModeUnitary::from_generator(n_max, &entries)
}

/// Possibly mixed state on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockState {
    space: FockSpace,
    branches: Vec<DVector<Complex64>>,
}

impl FockState {
    pub fn vacuum(num_modes: usize, n_max: usize) -> Result<Self> {
        let space = FockSpace::new(num_modes, n_max)?;
        let mut v = DVector::zeros(space.dim());
        v[0] = Complex64::new(1.0, 0.0);
        Ok(Self { space, branches: vec![v] })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn is_pure(&self) -> bool {
        self.branches.len() == 1
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// State vector of a pure state.
    pub fn state_vector(&self) -> Option<&DVector<Complex64>> {
        self.is_pure().then(|| &self.branches[0])
    }

    pub fn trace(&self) -> f64 {
        self.branches.iter().map(|v| v.norm_squared()).sum()
    }

    /// Dense density matrix; only sensible for small spaces.
    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        let dim = self.space.dim();
        let mut rho = DMatrix::zeros(dim, dim);
        for v in &self.branches {
            rho += v * v.adjoint();
        }
        rho
    }

    /// Lists every flat index whose occupations of modes `i` and `j` vanish.
    fn pair_bases(&self, i: usize, j: usize) -> Vec<usize> {
        (0..self.space.dim())
            .filter(|&k| self.space.occupation(k, i) == 0 && self.space.occupation(k, j) == 0)
            .collect()
    }

    /// Applies a two-mode unitary with its first mode on `i` and second on `j`.
    pub fn apply_two_mode(&self, unitary: &TwoModeUnitary, i: usize, j: usize) -> Result<Self> {
        self.space.check_mode(i)?;
        self.space.check_mode(j)?;
        if i == j {
            return Err(Error::InvalidArgument("two-mode unitary needs distinct modes".into()));
        }
        if unitary.n_max != self.space.n_max {
            return Err(Error::InvalidArgument("unitary truncation does not match the state".into()));
        }
        let d = self.space.n_max + 1;
        let (si, sj) = (self.space.stride(i), self.space.stride(j));
        let offset = |local: usize| (local / d) * si + (local % d) * sj;
        let bases = self.pair_bases(i, j);
        let branches = self
            .branches
            .iter()
            .map(|v| {
                let mut out = v.clone();
                let mut gathered = DVector::zeros(0);
                for block in &unitary.blocks {
                    let offsets: Vec<usize> = block.indices.iter().map(|&l| offset(l)).collect();
                    for &base in &bases {
                        gathered = DVector::from_iterator(offsets.len(), offsets.iter().map(|&o| v[base + o]));
                        if gathered.iter().all(|z| z.norm_sqr() == 0.0) {
                            continue;
                        }
                        let image = &block.unitary * &gathered;
                        for (&o, z) in offsets.iter().zip(image.iter()) {
                            out[base + o] = *z;
                        }
                    }
                }
                drop(gathered);
                out
            })
            .collect();
        Ok(Self { space: self.space, branches })
    }

    /// `exp(i φ Σ_{m ∈ modes} n_m)`.
    pub fn apply_phase(&self, modes: &[usize], phi: f64) -> Result<Self> {
        for &m in modes {
            self.space.check_mode(m)?;
        }
        ensure_finite(phi, "phase")?;
        let phases: Vec<Complex64> = (0..self.space.dim())
            .map(|k| {
                let n: usize = modes.iter().map(|&m| self.space.occupation(k, m)).sum();
                Complex64::from_polar(1.0, phi * n as f64)
            })
            .collect();
        let branches = self
            .branches
            .iter()
            .map(|v| DVector::from_iterator(v.len(), v.iter().zip(&phases).map(|(a, p)| a * p)))
            .collect();
        Ok(Self { space: self.space, branches })
    }

    /// Amplitude-damping channel with transmission `eta` on `mode`, with Kraus
    /// operators `K_k |n⟩ = √(C(n,k) η^{n−k} (1−η)^k) |n−k⟩`.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.space.check_mode(mode)?;
        ensure_unit_interval(eta, "efficiency")?;
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let n_max = self.space.n_max;
        let stride = self.space.stride(mode);
        let weights = kraus_weights(n_max, eta);
        let mut branches = Vec::new();
        for v in &self.branches {
            for (k, row) in weights.iter().enumerate() {
                let mut out = DVector::zeros(v.len());
                for (idx, z) in v.iter().enumerate() {
                    let n = self.space.occupation(idx, mode);
                    if n >= k && z.norm_sqr() > 0.0 {
                        out[idx - k * stride] = z * row[n];
                    }
                }
                if out.norm_squared() > ZERO_BRANCH {
                    branches.push(out);
                }
            }
        }
        Ok(Self { space: self.space, branches })
    }

    /// Probability that no photon survives in `modes` after each mode `m`
    /// passes a final loss of transmission `efficiencies[m]`, computed as the
    /// expectation of the dual of the vacuum projector, `Σ_n (1−η)^n |n⟩⟨n|`.
    pub fn no_click_probability(&self, modes: &[usize], efficiencies: &[f64]) -> Result<f64> {
        if modes.len() != efficiencies.len() {
            return Err(Error::InvalidArgument("one efficiency per mode is required".into()));
        }
        for (&m, &eta) in modes.iter().zip(efficiencies) {
            self.space.check_mode(m)?;
            ensure_unit_interval(eta, "efficiency")?;
        }
        let weights: Vec<f64> = (0..self.space.dim())
            .map(|k| {
                modes
                    .iter()
                    .zip(efficiencies)
                    .map(|(&m, &eta)| (1.0 - eta).powi(self.space.occupation(k, m) as i32))
                    .product()
            })
            .collect();
        Ok(self
            .branches
            .iter()
            .map(|v| v.iter().zip(&weights).map(|(z, w)| z.norm_sqr() * w).sum::<f64>())
            .sum())
    }
}

fn kraus_weights(n_max: usize, eta: f64) -> Vec<Vec<f64>> {
    // row k, column n: √(C(n,k) η^{n−k} (1−η)^k)
    let mut binom = vec![vec![0.0f64; n_max + 1]; n_max + 1];
    for n in 0..=n_max {
        binom[0][n] = 1.0;
        for k in 1..=n {
            binom[k][n] = binom[k - 1][n] * (n + 1 - k) as f64 / k as f64;
        }
    }
    (0..=n_max)
        .map(|k| {
            (0..=n_max)
                .map(|n| {
                    if n < k {
                        0.0
                    } else {
                        (binom[k][n] * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt()
                    }
                })
                .collect()
        })
        .collect()
}

/// Click statistics of the interferometer from the truncated Fock
/// simulation, requiring the truncation bound to stay below 1e-8.
pub fn simulate_fock(cfg: &InterferometerConfig, phi: f64, n_max: usize) -> Result<ClickDistribution> {
    simulate_fock_with_budget(cfg, phi, n_max, DEFAULT_TRUNCATION_BUDGET)
}

/// As [`simulate_fock`], with an explicit truncation budget.
///
/// Perfect overlap leaves the ancilla modes in vacuum, so the simulation then
/// runs on the two matched modes only.
pub fn simulate_fock_with_budget(
    cfg: &InterferometerConfig,
    phi: f64,
    n_max: usize,
    budget: f64,
) -> Result<ClickDistribution> {
    let state = fock_interferometer_state(cfg, phi, n_max, budget)?;
    let with_ancilla = state.space().num_modes() == 4;
    let arm = |main: usize, ancilla: usize| {
        if with_ancilla && cfg.ancilla_detected {
            vec![main, ancilla]
        } else {
            vec![main]
        }
    };
    let (arm_h, arm_v) = (arm(MODE_A, MODE_A_ANCILLA), arm(MODE_B, MODE_B_ANCILLA));
    let eff_h = vec![cfg.eta_h; arm_h.len()];
    let eff_v = vec![cfg.eta_v; arm_v.len()];
    let both: Vec<usize> = arm_h.iter().chain(&arm_v).copied().collect();
    let eff_both: Vec<f64> = eff_h.iter().chain(&eff_v).copied().collect();
    let (quiet_h, quiet_v) = (1.0 - cfg.dark_count_h, 1.0 - cfg.dark_count_v);
    let none_h = quiet_h * state.no_click_probability(&arm_h, &eff_h)?;
    let none_v = quiet_v * state.no_click_probability(&arm_v, &eff_v)?;
    let none_both = quiet_h * quiet_v * state.no_click_probability(&both, &eff_both)?;
    outcomes_from_no_click(none_h, none_v, none_both)
}

/// State just before the external losses and detectors.
pub fn fock_interferometer_state(
    cfg: &InterferometerConfig,
    phi: f64,
    n_max: usize,
    budget: f64,
) -> Result<FockState> {
    cfg.validate()?;
    ensure_finite(phi, "phase")?;
    let bound = truncation_error_bound(cfg.total_squeezing(), n_max);
    if bound > budget {
        return Err(Error::TruncationBudget { bound, budget, n_max });
    }
    let num_modes = if cfg.overlap < 1.0 { 4 } else { 2 };
    let mut state = FockState::vacuum(num_modes, n_max)?
        .apply_two_mode(&squeezer_unitary(cfg.r1, n_max)?, MODE_A, MODE_B)?
        .apply_loss(MODE_A, cfg.eta_internal)?
        .apply_loss(MODE_B, cfg.eta_internal)?;
    let all: Vec<usize> = (0..num_modes).collect();
    state = state.apply_phase(&all, phi + cfg.phase_offset)?;
    if num_modes == 4 {
        let mixer = beamsplitter_unitary(cfg.mismatch_angle(), n_max)?;
        state = state
            .apply_two_mode(&mixer, MODE_A, MODE_A_ANCILLA)?
            .apply_two_mode(&mixer, MODE_B, MODE_B_ANCILLA)?;
    }
    state.apply_two_mode(&squeezer_unitary(cfg.r2, n_max)?, MODE_A, MODE_B)
}

/// Agreement of one configuration between the Gaussian model and the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub r: f64,
    pub eta: f64,
    pub phases: usize,
    pub n_max: usize,
    pub truncation_bound: f64,
    pub max_abs_diff: f64,
}

/// Default grid of the equivalence suite: r ∈ {0.3, 0.59} × η ∈ {1, 0.75},
/// perfect overlap, 73 phases over `[0, π]`, n_max = 48.
pub const ORACLE_R_VALUES: [f64; 2] = [0.3, 0.59];
pub const ORACLE_ETA_VALUES: [f64; 2] = [1.0, 0.75];
pub const ORACLE_PHASES: usize = 73;
pub const ORACLE_N_MAX: usize = 48;
pub const ORACLE_TOLERANCE: f64 = 1e-6;

/// Largest absolute difference between [`click_model`] and
/// [`simulate_fock`] over `phases` evenly spaced phases in `[0, π]`.
pub fn oracle_case(cfg: &InterferometerConfig, phases: usize, n_max: usize) -> Result<OracleCase> {
    if phases < 2 {
        return Err(Error::Precondition("the phase grid needs at least 2 points".into()));
    }
    let diffs: Vec<f64> = (0..phases)
        .into_par_iter()
        .map(|k| {
            let phi = k as f64 * PI / (phases - 1) as f64;
            let gaussian = click_model(cfg, phi)?.as_array();
            let fock = simulate_fock(cfg, phi, n_max)?.as_array();
            Ok(gaussian.iter().zip(&fock).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(OracleCase {
        r: cfg.r1,
        eta: cfg.eta_h,
        phases,
        n_max,
        truncation_bound: truncation_error_bound(cfg.total_squeezing(), n_max),
        max_abs_diff: diffs.into_iter().fold(0.0, f64::max),
    })
}

/// Runs [`oracle_case`] over the default (r, η) grid.
pub fn oracle_suite() -> Result<Vec<OracleCase>> {
    let mut cases = Vec::new();
    for r in ORACLE_R_VALUES {
        for eta in ORACLE_ETA_VALUES {
            cases.push(oracle_case(&InterferometerConfig::symmetric(r, eta), ORACLE_PHASES, ORACLE_N_MAX)?);
        }
    }
    Ok(cases)
}
