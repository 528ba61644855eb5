use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// Matérn with smoothness 3/2.
    #[serde(rename = "matern_nu_1_5")]
    Matern32,
    #[serde(rename = "rbf")]
    Rbf,
}

/// Stationary covariance function with per-dimension (or shared) length scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// One entry means isotropic; otherwise one per input dimension.
    pub length_scales: Vec<f64>,
    #[serde(default = "one")]
    pub signal_variance: f64,
}

fn one() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn matern32(length_scale: f64) -> Self {
        Self {
            family: KernelFamily::Matern32,
            length_scales: vec![length_scale],
            signal_variance: 1.0,
        }
    }

    pub fn rbf(length_scales: Vec<f64>) -> Self {
        Self {
            family: KernelFamily::Rbf,
            length_scales,
            signal_variance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_scales.is_empty() {
            return Err(Error::Invalid("kernel needs at least one length scale".into()));
        }
        if self.length_scales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Invalid("kernel length scales must be positive".into()));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::Invalid("kernel signal variance must be positive".into()));
        }
        Ok(())
    }

    pub fn is_isotropic(&self) -> bool {
        self.length_scales.len() == 1
    }

    /// Checks that the kernel can be applied to `dim`-dimensional inputs.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.is_isotropic() || self.length_scales.len() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.length_scales.len(),
                got: dim,
            })
        }
    }

    /// Covariance between two points.
    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        if x1.len() != x2.len() {
            return Err(Error::DimensionMismatch {
                expected: x1.len(),
                got: x2.len(),
            });
        }
        self.check_dim(x1.len())?;
        Ok(self.eval_unchecked(x1, x2))
    }

    /// Squared length-scale-weighted distance.
    #[inline]
    pub fn scaled_sq_dist(&self, x1: &[f64], x2: &[f64]) -> f64 {
        if self.is_isotropic() {
            let l = self.length_scales[0];
            x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (l * l)
        } else {
            x1.iter()
                .zip(x2)
                .zip(&self.length_scales)
                .map(|((a, b), l)| {
                    let d = (a - b) / l;
                    d * d
                })
                .sum()
        }
    }

    #[inline]
    pub fn eval_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let r2 = self.scaled_sq_dist(x1, x2);
        self.signal_variance * correlation(self.family, r2)
    }
}

/// Unit-variance correlation as a function of the squared scaled distance.
#[inline]
pub fn correlation(family: KernelFamily, r2: f64) -> f64 {
    match family {
        KernelFamily::Rbf => (-0.5 * r2).exp(),
        KernelFamily::Matern32 => {
            let s = SQRT_3 * r2.sqrt();
            (1.0 + s) * (-s).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_covariance_is_signal_variance() {
        let mut k = KernelSpec::matern32(0.7);
        k.signal_variance = 2.5;
        let x = [0.3, -1.0, 4.0];
        assert_eq!(k.eval(&x, &x).unwrap(), 2.5);
        let r = KernelSpec::rbf(vec![0.3, 0.5, 1.0]);
        assert_eq!(r.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn matern_at_one_length_scale() {
        let k = KernelSpec::matern32(1.0);
        let expected = (1.0 + 3f64.sqrt()) * (-(3f64.sqrt())).exp();
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.48335).abs() < 1e-5);
    }

    #[test]
    fn rbf_at_one_length_scale() {
        let k = KernelSpec::rbf(vec![0.3]);
        let v = k.eval(&[0.0], &[0.3]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        assert!((v - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn anisotropic_weights_dimensions() {
        let k = KernelSpec::rbf(vec![1.0, 2.0]);
        let v = k.eval(&[0.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let k = KernelSpec::rbf(vec![1.0, 2.0]);
        assert!(k.eval(&[0.0], &[1.0, 2.0]).is_err());
        assert!(k.eval(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
