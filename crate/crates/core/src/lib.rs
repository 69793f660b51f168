//! Four-photon ac Stark shifts of a hyperfine qubit driven by a single
//! frequency-comb Raman beam, with synthetic scans and the fitters that
//! turn them back into beam and field parameters.
//!
//! Units: frequencies are Hz at the edges (config, CSV, reports) and rad/s
//! inside the engine; angles are degrees at the edges and radians inside;
//! lengths are μm and powers mW.

pub mod config;
pub mod dataset;
pub mod engine;
pub mod fit;
pub mod polarization;
pub mod selftest;
pub mod sim;
pub mod units;

pub use config::{
    level_splitting, load_config, CombSpec, ConfigError, ExperimentConfig, FieldGeometry,
    IonSpecies, QubitState,
};
pub use dataset::{ScanDataset, ScanKind, ScanRecord};
pub use engine::{differential_shift, EngineError, ShiftEngine};
pub use fit::{FitError, FitResult};
pub use sim::{BeamGeometry, NoiseModel, SimError, Simulator};
pub use units::{Angle, Frequency};
