//! Per-iteration diagnostics shown to the experts before they review a batch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::state::{ModelSnapshot, Phase};
use crate::acquisition::Strategy;
use crate::analysis::AnalysisReport;
use crate::dataset::FeatureSource;
use crate::error::Result;
use crate::sampling::{lhc_sample, SurrogateSpaceSpec};

pub const NEGATIVE_PREDICTION_FLAG: &str = "non-physical predictions: negative concentrations present";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelQuality {
    pub target: String,
    pub n_train: usize,
    pub log_marginal_likelihood: f64,
    pub loo_rmse: f64,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
}

/// What the analysis models were trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisSource {
    /// Measured records.
    Records,
    /// Surrogate predictions over sampled conditions.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub phase: Phase,
    pub space_label: String,
    pub n_training: usize,
    pub model_quality: Vec<ModelQuality>,
    pub analysis_source: AnalysisSource,
    pub analysis: Vec<AnalysisReport>,
    /// Surrogate-space points with a negative predicted mean, per target.
    pub negative_predictions: BTreeMap<String, usize>,
    pub flags: Vec<String>,
}

impl IterationReport {
    pub fn analysis_for(&self, target: &str) -> Option<&AnalysisReport> {
        self.analysis.iter().find(|a| a.target == target)
    }
}

pub fn model_quality(snapshot: &ModelSnapshot) -> ModelQuality {
    let m = &snapshot.model;
    ModelQuality {
        target: snapshot.target.name().to_string(),
        n_train: m.n_train(),
        log_marginal_likelihood: m.log_marginal_likelihood(),
        loo_rmse: m.loo_rmse(),
        length_scales: m.kernel().length_scales.clone(),
        signal_variance: m.kernel().signal_variance,
    }
}

/// Counts negative predicted means over a Latin hypercube of `spec` and
/// derives the report flags. Predictions are never clamped.
pub fn physicality_flags(
    models: &[ModelSnapshot],
    spec: &SurrogateSpaceSpec,
    seed: u64,
) -> Result<(BTreeMap<String, usize>, Vec<String>)> {
    let points = lhc_sample(spec, seed)?;
    let mut counts = BTreeMap::new();
    for snap in models {
        let x: Vec<Vec<f64>> = points.iter().map(|p| p.feature_vector(&snap.features)).collect();
        let n = snap.model.predict_mean(&x)?.iter().filter(|m| **m < 0.0).count();
        counts.insert(snap.target.name().to_string(), n);
    }
    let mut flags = Vec::new();
    if counts.values().any(|n| *n > 0) {
        flags.push(NEGATIVE_PREDICTION_FLAG.to_string());
    }
    Ok((counts, flags))
}
