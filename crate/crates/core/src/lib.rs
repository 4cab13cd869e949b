//! Online clustering of Gaussian bandit arms with fixed-confidence stopping.
//!
//! Arms share unknown cluster centers. A sampling rule decides which arm to
//! pull; a stopping rule decides when the clustering of the empirical means
//! is trustworthy at confidence `1 − δ`.

pub mod agent;
pub mod clustering;
pub mod error;
pub mod hardness;
pub mod harness;
pub mod model;
pub mod thresholds;
pub mod verify;

pub use agent::{run_trial, Algorithm, Trial, TrialConfig, TrialRecord};
pub use error::{Error, Result};
pub use hardness::{solve_dstar, HardnessSolution, SimplexWeights};
pub use model::{Instance, Partition, Permutation};
pub use thresholds::ThresholdKind;
