//! Cavity-mode entanglement mediated by a single-molecule magnet: Gaussian
//! covariance dynamics at three approximation orders, a truncated
//! density-matrix engine, and the experiment recipes built on both.

pub mod config;
pub mod entanglement;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod lindblad;
pub mod linalg;
pub mod mean_field;
pub mod ode;

pub use config::{ModelOrder, PhysicalConfig, PresetName};
pub use entanglement::{log_negativity, ModePartition};
pub use error::{Error, Result};
pub use gaussian::{CovarianceState, DriftModel, QuadratureLayout};
pub use harness::{EntanglementTrace, PartitionMode, SweepTable};
pub use lindblad::{TruncatedState, TruncationSpec};
pub use mean_field::MeanAmplitudes;
