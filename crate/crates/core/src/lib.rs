//! Simulation and analysis of a two-squeezer (SU(1,1)) interferometer read
//! out by threshold detectors: click statistics, Fisher information, phase
//! estimation and Monte Carlo tracking.

pub mod config;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod gaussian;
pub mod metrology;
pub mod optimize;
pub mod random;
pub mod simkit;

pub use config::InterferometerConfig;
pub use detection::{click_model, ArmAssignment, ClickDistribution};
pub use error::{Error, Result};
pub use estimation::{Branch, CalibrationModel, CalibrationSample, Objective, PhaseEstimate};
pub use gaussian::GaussianState;
pub use metrology::{FisherReport, NoonBaseline, PhotonAccounting};
pub use simkit::{SensitivityReport, TrackingRun, TrackingScenario, WindowRecord};
