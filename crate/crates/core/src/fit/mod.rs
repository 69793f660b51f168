//! Fitters that turn scan datasets back into physical parameters, and the
//! alignment-sensitivity comparison between Rabi and Stark-shift signals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, ScanDataset};
use crate::engine::EngineError;

mod frequency;
mod hwp;
pub mod lm;
mod power;
mod profile;
mod sensitivity;

pub use frequency::fit_frequency;
pub use hwp::{fit_hwp_scan, hwp_shape, FixedAngles, HwpModel};
pub use power::{fit_power_law, power_law_exponent};
pub use profile::{fit_beam_profile, fit_rabi_profile};
pub use sensitivity::{
    alignment_report, sensitivity_analysis, AlignmentReport, BeamAlignment, SensitivityCurve,
};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    UnderSampled { needed: usize, got: usize },
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
    #[error("degenerate scan: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Fitted parameters with 1σ uncertainties. Parameter names carry their
/// unit as a suffix (`waist_um`, `alpha_deg`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BTreeMap<String, f64>,
    pub sigmas: BTreeMap<String, f64>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.sigmas.get(name).copied()
    }

    fn insert(&mut self, name: &str, value: f64, sigma: f64) {
        self.params.insert(name.to_string(), value);
        self.sigmas.insert(name.to_string(), sigma);
    }

    fn empty(residual_rms: f64, iterations: usize) -> Self {
        FitResult {
            params: BTreeMap::new(),
            sigmas: BTreeMap::new(),
            residual_rms,
            converged: true,
            iterations,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

/// 1/σ weights when every record has a positive uncertainty, else unit
/// weights.
fn weights(scan: &ScanDataset) -> Vec<f64> {
    let sigmas = scan.sigmas();
    if sigmas.iter().all(|s| *s > 0.0 && s.is_finite()) {
        sigmas.iter().map(|s| 1.0 / s).collect()
    } else {
        vec![1.0; sigmas.len()]
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
