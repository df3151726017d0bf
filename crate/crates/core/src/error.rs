use thiserror::Error;

/// Errors produced by the simulation, metrology and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("phase is unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("truncation bound {bound:.3e} exceeds budget {budget:.3e} (n_max = {n_max})")]
    TruncationBudget { bound: f64, budget: f64, n_max: usize },

    #[error("root is not bracketed: f({lo}) = {f_lo:.4e}, f({hi}) = {f_hi:.4e}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("eigendecomposition did not converge: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::InvalidState(_)
                | Error::Unidentifiable(_)
                | Error::TruncationBudget { .. }
                | Error::Bracket { .. }
                | Error::Convergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} = {value}")))
    }
}

pub(crate) fn ensure_unit_interval(value: f64, what: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidArgument(format!("{what} = {value} is outside [0, 1]")))
    }
}
