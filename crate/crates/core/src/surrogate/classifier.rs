//! Threshold classifier: a GP regressor on {0, 1} labels whose clamped
//! posterior mean is read as a probability.

use serde::{Deserialize, Serialize};

use super::gp::{GpConfig, GpModel};
use super::kernel::KernelSpec;
use super::ProbabilityModel;
use crate::dataset::FeatureScaler;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const CLASSIFIER_ALPHA: f64 = 0.06;
pub const CLASSIFIER_LENGTH_SCALE: f64 = 0.3;

impl GpConfig {
    /// Fixed RBF kernel with length 0.3 per dimension and alpha 0.06.
    pub fn classifier(dim: usize) -> Self {
        GpConfig::fixed(KernelSpec::rbf(vec![CLASSIFIER_LENGTH_SCALE; dim]), CLASSIFIER_ALPHA)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpClassifier {
    pub inner: GpModel,
    pub threshold: f64,
}

fn encode(labels: &[bool]) -> Result<Vec<f64>> {
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(labels.iter().map(|l| if *l { 1.0 } else { 0.0 }).collect())
}

impl GpClassifier {
    pub fn fit(inputs: &[Vec<f64>], labels: &[bool], config: &GpConfig, seed: u64) -> Result<Self> {
        let y = encode(labels)?;
        Ok(Self {
            inner: GpModel::fit(inputs, &y, config, seed)?,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn fit_with_scaler(
        inputs: &[Vec<f64>],
        labels: &[bool],
        scaler: FeatureScaler,
        config: &GpConfig,
        seed: u64,
    ) -> Result<Self> {
        let y = encode(labels)?;
        Ok(Self {
            inner: GpModel::fit_with_scaler(inputs, &y, scaler, config, seed)?,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Invalid(format!("threshold {threshold} must lie in (0, 1)")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn predict_proba(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self
            .inner
            .predict_mean(points)?
            .into_iter()
            .map(|m| m.clamp(0.0, 1.0))
            .collect())
    }

    pub fn predict_class(&self, points: &[Vec<f64>]) -> Result<Vec<bool>> {
        Ok(self
            .predict_proba(points)?
            .into_iter()
            .map(|p| p >= self.threshold)
            .collect())
    }

    pub fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
}

impl ProbabilityModel for GpClassifier {
    fn input_dim(&self) -> usize {
        GpClassifier::input_dim(self)
    }

    fn predict_proba(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        GpClassifier::predict_proba(self, points)
    }
}

/// Fits a threshold classifier with a fixed kernel and the given alpha.
pub fn gpc_fit(inputs: &[Vec<f64>], labels: &[bool], kernel: KernelSpec, alpha: f64, seed: u64) -> Result<GpClassifier> {
    GpClassifier::fit(inputs, labels, &GpConfig::fixed(kernel, alpha), seed)
}

pub fn gpc_predict_proba(clf: &GpClassifier, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    clf.predict_proba(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let err = gpc_fit(&x, &[true, true], KernelSpec::rbf(vec![0.3]), 0.06, 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateLabels));
    }

    #[test]
    fn symmetric_pair_gives_half_at_midpoint() {
        let x = vec![vec![-1.0], vec![1.0]];
        let clf = GpClassifier::fit_with_scaler(
            &x,
            &[false, true],
            FeatureScaler::identity(1),
            &GpConfig::fixed(KernelSpec::rbf(vec![1.0]), 0.06),
            0,
        )
        .unwrap();
        let p = clf.predict_proba(&[vec![0.0], vec![1.0], vec![-1.0]]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-6);
        assert!(p[1] > 0.5);
        assert!(p[2] < 0.5);
    }

    #[test]
    fn probabilities_are_clamped() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = [false, false, true, true, true, false];
        let clf = gpc_fit(&x, &labels, KernelSpec::rbf(vec![0.3]), 1e-6, 0).unwrap();
        let grid: Vec<Vec<f64>> = (0..200).map(|i| vec![-2.0 + i as f64 * 0.05]).collect();
        for p in clf.predict_proba(&grid).unwrap() {
            assert!((0.0..=1.0).contains(&p));
        }
        let classes = clf.predict_class(&x).unwrap();
        assert_eq!(classes, labels);
    }
}
