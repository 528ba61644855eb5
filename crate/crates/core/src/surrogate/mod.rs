//! Surrogate models: GP regression, GP threshold classification and a
//! random-forest regressor used by the analysis module.

pub mod classifier;
pub mod forest;
pub mod gp;
pub mod kernel;
pub mod linalg;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use classifier::{gpc_fit, gpc_predict_proba, GpClassifier};
pub use forest::{forest_fit, forest_predict, tune_forest, ForestModel, ForestParams, ForestSearchSpace};
pub use gp::{gpr_fit, gpr_predict, GpConfig, GpModel, GpSnapshot, PriorMean};
pub use kernel::{KernelFamily, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

/// A regressor reporting posterior uncertainty.
pub trait UncertainModel: Sync {
    fn input_dim(&self) -> usize;
    fn predict(&self, points: &[Vec<f64>]) -> Result<Vec<Prediction>>;
}

/// A model mapping points to probabilities in [0, 1].
pub trait ProbabilityModel: Sync {
    fn input_dim(&self) -> usize;
    fn predict_proba(&self, points: &[Vec<f64>]) -> Result<Vec<f64>>;
}

pub fn kernel_eval(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    spec.eval(x1, x2)
}
