//! Diagnostics shown to the human reviewer each iteration: Pearson
//! correlations, Monte-Carlo permutation Shapley importances with a random
//! control feature, and one-sigma sensitivity.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::check_rows;
use crate::error::{Error, Result};
use crate::surrogate::{tune_forest, ForestSearchSpace, GpConfig, GpModel};

pub const RANDOM_CONTROL: &str = "random_control";

// ---------------------------------------------------------------------------
// Pearson

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub n_samples: usize,
    /// Constant columns left out of the matrix.
    pub dropped: Vec<String>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }
}

/// Pearson coefficients between the columns of `matrix`.
pub fn pearson_matrix<S: AsRef<str>>(matrix: &[Vec<f64>], names: &[S]) -> Result<CorrelationMatrix> {
    if matrix.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: matrix.len(),
        });
    }
    let d = names.len();
    check_rows(matrix, d)?;
    let n = matrix.len() as f64;

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut centered: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let col: Vec<f64> = matrix.iter().map(|r| r[j]).collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("column `{}` has non-finite values", names[j].as_ref())));
        }
        let mean = col.iter().sum::<f64>() / n;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        if ss.sqrt() <= 1e-12 * (1.0 + mean.abs()) * n.sqrt() {
            tracing::info!(column = names[j].as_ref(), "dropping constant column from correlation matrix");
            dropped.push(names[j].as_ref().to_string());
        } else {
            let norm = ss.sqrt();
            kept.push(names[j].as_ref().to_string());
            centered.push(c.into_iter().map(|v| v / norm).collect());
        }
    }
    if kept.is_empty() {
        return Err(Error::Invalid("all columns are constant; correlation matrix is empty".into()));
    }
    let k = kept.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in 0..i {
            let r: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = r.clamp(-1.0, 1.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: kept,
        values,
        n_samples: matrix.len(),
        dropped,
    })
}

// ---------------------------------------------------------------------------
// Shapley

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    /// Mean absolute Shapley value over explained rows.
    pub mean_abs: f64,
    /// 95% normal-approximation half-width of `mean_abs`.
    pub half_width: f64,
    /// 1 is most important.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
    pub n_permutations: usize,
    pub n_explained: usize,
    /// Mean prediction over the background set.
    pub base_value: f64,
}

impl ImportanceReport {
    pub fn get(&self, name: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// Per-row Shapley estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyValues {
    pub values: Vec<Vec<f64>>,
    /// Per row, the mean of `f(x) - f(z)` over the sampled baselines `z`;
    /// each row of `values` sums to this exactly.
    pub sampled_gap: Vec<f64>,
    pub base_value: f64,
}

/// Permutation-sampling Shapley values with a marginal baseline: every
/// permutation draws one background row and switches features to the
/// explained row's values in permutation order.
pub fn shapley_values<F>(
    predict: F,
    background: &[Vec<f64>],
    explain: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyValues>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<f64>> + Sync,
{
    if n_permutations == 0 {
        return Err(Error::Invalid("n_permutations must be at least 1".into()));
    }
    if background.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let d = background[0].len();
    check_rows(background, d)?;
    check_rows(explain, d)?;

    let bg_pred = predict(background).map_err(|e| e.context("predicting background rows"))?;
    let base_value = bg_pred.iter().sum::<f64>() / bg_pred.len() as f64;

    let rows: Vec<(Vec<f64>, f64)> = explain
        .par_iter()
        .enumerate()
        .map(|(row, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(row as u64 + 1);
            let mut order: Vec<usize> = (0..d).collect();
            // one batch per row: (d + 1) points per permutation
            let mut batch = Vec::with_capacity(n_permutations * (d + 1));
            let mut orders = Vec::with_capacity(n_permutations);
            for _ in 0..n_permutations {
                order.shuffle(&mut rng);
                let z = &background[rng.gen_range(0..background.len())];
                let mut cur = z.clone();
                batch.push(cur.clone());
                for &j in &order {
                    cur[j] = x[j];
                    batch.push(cur.clone());
                }
                orders.push(order.clone());
            }
            let preds = predict(&batch).map_err(|e| e.context(format!("predicting Shapley coalitions for row {row}")))?;
            if preds.len() != batch.len() {
                return Err(Error::DimensionMismatch {
                    expected: batch.len(),
                    got: preds.len(),
                });
            }
            let mut phi = vec![0.0; d];
            let mut gap = 0.0;
            for (p, order) in orders.iter().enumerate() {
                let base = p * (d + 1);
                for (k, &j) in order.iter().enumerate() {
                    phi[j] += preds[base + k + 1] - preds[base + k];
                }
                gap += preds[base + d] - preds[base];
            }
            let m = n_permutations as f64;
            Ok((phi.into_iter().map(|v| v / m).collect(), gap / m))
        })
        .collect::<Result<_>>()?;

    let (values, sampled_gap) = rows.into_iter().unzip();
    Ok(ShapleyValues {
        values,
        sampled_gap,
        base_value,
    })
}

/// Aggregates mean |Shapley| per feature and ranks them.
pub fn shapley_importance<F, S>(
    predict: F,
    background: &[Vec<f64>],
    explain: &[Vec<f64>],
    names: &[S],
    n_permutations: usize,
    seed: u64,
) -> Result<ImportanceReport>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<f64>> + Sync,
    S: AsRef<str>,
{
    if background.first().is_some_and(|r| r.len() != names.len()) {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            got: background[0].len(),
        });
    }
    let sv = shapley_values(predict, background, explain, n_permutations, seed)?;
    let n = sv.values.len().max(1) as f64;
    let mut features: Vec<FeatureImportance> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let abs: Vec<f64> = sv.values.iter().map(|r| r[j].abs()).collect();
            let mean = abs.iter().sum::<f64>() / n;
            let var = if abs.len() > 1 {
                abs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (abs.len() - 1) as f64
            } else {
                0.0
            };
            FeatureImportance {
                name: name.as_ref().to_string(),
                mean_abs: mean,
                half_width: 1.96 * (var / n).sqrt(),
                rank: 0,
            }
        })
        .collect();
    assign_ranks(features.iter().map(|f| f.mean_abs).collect(), |i, r| features[i].rank = r);
    Ok(ImportanceReport {
        features,
        n_permutations,
        n_explained: sv.values.len(),
        base_value: sv.base_value,
    })
}

fn assign_ranks(scores: Vec<f64>, mut set: impl FnMut(usize, usize)) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    for (rank, i) in order.into_iter().enumerate() {
        set(i, rank + 1);
    }
}

/// Appends a uniform(0, 1) column drawn from its own seeded stream.
pub fn append_random_control(matrix: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xc0_17_01);
    matrix
        .iter()
        .map(|r| {
            let mut row = r.clone();
            row.push(rng.gen::<f64>());
            row
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Sensitivity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub names: Vec<String>,
    /// Mean absolute central difference per feature.
    pub raw: Vec<f64>,
    /// `raw` divided by its maximum (all zeros when the maximum is zero).
    pub normalized: Vec<f64>,
    pub ranks: Vec<usize>,
    pub n_points: usize,
}

impl SensitivityReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.normalized[i])
    }

    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name).map(|i| self.ranks[i])
    }
}

/// One-sigma central perturbation response per feature.
pub fn sensitivity<F, S>(predict: F, points: &[Vec<f64>], feature_stds: &[f64], names: &[S]) -> Result<SensitivityReport>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<f64>>,
    S: AsRef<str>,
{
    let d = feature_stds.len();
    if names.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: names.len(),
        });
    }
    if points.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    check_rows(points, d)?;
    if let Some(j) = feature_stds.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::DegenerateFeature {
            column: names[j].as_ref().to_string(),
        });
    }
    let mut batch = Vec::with_capacity(points.len() * d * 2);
    for p in points {
        for (j, s) in feature_stds.iter().enumerate() {
            let mut up = p.clone();
            up[j] += s;
            let mut down = p.clone();
            down[j] -= s;
            batch.push(up);
            batch.push(down);
        }
    }
    let preds = predict(&batch).map_err(|e| e.context("predicting sensitivity probes"))?;
    let mut raw = vec![0.0; d];
    for (i, pair) in preds.chunks(2).enumerate() {
        raw[i % d] += (pair[0] - pair[1]).abs();
    }
    raw.iter_mut().for_each(|v| *v /= points.len() as f64);
    let max = raw.iter().copied().fold(0.0, f64::max);
    let normalized: Vec<f64> = if max > 0.0 { raw.iter().map(|v| v / max).collect() } else { vec![0.0; d] };
    let mut ranks = vec![0; d];
    assign_ranks(raw.clone(), |i, r| ranks[i] = r);
    Ok(SensitivityReport {
        names: names.iter().map(|n| n.as_ref().to_string()).collect(),
        raw,
        normalized,
        ranks,
        n_points: points.len(),
    })
}

// ---------------------------------------------------------------------------
// Pipeline

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Forest,
    Gp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub backend: Backend,
    pub n_permutations: usize,
    /// Explained rows are subsampled to at most this many.
    pub max_explained: usize,
    pub forest_search: ForestSearchSpace,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Forest,
            n_permutations: 64,
            max_explained: 200,
            forest_search: ForestSearchSpace::default(),
        }
    }
}

/// Everything computed for one target in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub target: String,
    pub backend: Backend,
    pub n_samples: usize,
    pub correlation: CorrelationMatrix,
    pub importance: ImportanceReport,
    pub sensitivity: SensitivityReport,
    /// Out-of-bag error of the backing forest.
    pub oob_mse: Option<f64>,
    /// Input columns dropped before modeling because they were constant.
    pub dropped_features: Vec<String>,
}

/// Correlation, importance and sensitivity for one target.
///
/// The backing model is trained on the non-constant columns of `inputs` plus
/// a random control column. Sensitivity is evaluated at the column means and
/// at each row of `probes`, with the control held at its mean.
pub fn analyze<S: AsRef<str>>(
    inputs: &[Vec<f64>],
    names: &[S],
    target_name: &str,
    targets: &[f64],
    probes: &[Vec<f64>],
    config: &AnalysisConfig,
    seed: u64,
) -> Result<AnalysisReport> {
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    if inputs.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: inputs.len(),
        });
    }
    let d = names.len();
    check_rows(inputs, d)?;
    check_rows(probes, d)?;

    let mut with_target: Vec<Vec<f64>> = inputs.to_vec();
    for (row, y) in with_target.iter_mut().zip(targets) {
        row.push(*y);
    }
    let mut corr_names: Vec<String> = names.iter().map(|n| n.as_ref().to_string()).collect();
    corr_names.push(target_name.to_string());
    let correlation = pearson_matrix(&with_target, &corr_names)?;

    let n = inputs.len() as f64;
    let mut keep = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut dropped_features = Vec::new();
    for j in 0..d {
        let mean = inputs.iter().map(|r| r[j]).sum::<f64>() / n;
        let std = (inputs.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        if std > 1e-12 * (1.0 + mean.abs()) {
            keep.push(j);
            means.push(mean);
            stds.push(std);
        } else {
            dropped_features.push(names[j].as_ref().to_string());
        }
    }
    if keep.is_empty() {
        return Err(Error::Invalid("every input column is constant".into()));
    }
    let project = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect()
    };
    let x = append_random_control(&project(inputs), seed);
    let mut model_names: Vec<String> = keep.iter().map(|&j| names[j].as_ref().to_string()).collect();
    model_names.push(RANDOM_CONTROL.to_string());
    let control_mean = x.iter().map(|r| r[r.len() - 1]).sum::<f64>() / n;
    let control_std = (x.iter().map(|r| (r[r.len() - 1] - control_mean).powi(2)).sum::<f64>() / n).sqrt();
    means.push(control_mean);
    stds.push(control_std.max(1e-12));

    let explain: Vec<Vec<f64>> = if x.len() > config.max_explained {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(17)));
        idx.truncate(config.max_explained);
        idx.sort_unstable();
        idx.into_iter().map(|i| x[i].clone()).collect()
    } else {
        x.clone()
    };

    let mut eval_points = vec![means.clone()];
    for p in project(probes) {
        let mut p = p;
        p.push(control_mean);
        eval_points.push(p);
    }

    let (importance, sens, oob_mse) = match config.backend {
        Backend::Forest => {
            let (forest, _) = tune_forest(&x, targets, &config.forest_search, seed)?;
            let f = |p: &[Vec<f64>]| forest.predict(p);
            (
                shapley_importance(f, &x, &explain, &model_names, config.n_permutations, seed)?,
                sensitivity(f, &eval_points, &stds, &model_names)?,
                forest.oob_mse,
            )
        }
        Backend::Gp => {
            let gp = GpModel::fit(&x, targets, &GpConfig::default(), seed)?;
            let f = |p: &[Vec<f64>]| gp.predict_mean(p);
            (
                shapley_importance(f, &x, &explain, &model_names, config.n_permutations, seed)?,
                sensitivity(f, &eval_points, &stds, &model_names)?,
                None,
            )
        }
    };

    Ok(AnalysisReport {
        target: target_name.to_string(),
        backend: config.backend,
        n_samples: inputs.len(),
        correlation,
        importance,
        sensitivity: sens,
        oob_mse,
        dropped_features,
    })
}

#[derive(Debug, Serialize)]
struct FlatRow<'a> {
    section: &'a str,
    target: &'a str,
    variable: &'a str,
    other: &'a str,
    value: f64,
    half_width: Option<f64>,
    rank: Option<usize>,
}

/// Long-format CSV of a report, one value per line, for plotting.
pub fn write_report_csv<W: Write>(sink: W, reports: &[AnalysisReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in reports {
        let c = &r.correlation;
        for (i, a) in c.names.iter().enumerate() {
            for (j, b) in c.names.iter().enumerate() {
                w.serialize(FlatRow {
                    section: "correlation",
                    target: &r.target,
                    variable: a,
                    other: b,
                    value: c.values[i][j],
                    half_width: None,
                    rank: None,
                })?;
            }
        }
        for f in &r.importance.features {
            w.serialize(FlatRow {
                section: "importance",
                target: &r.target,
                variable: &f.name,
                other: "",
                value: f.mean_abs,
                half_width: Some(f.half_width),
                rank: Some(f.rank),
            })?;
        }
        let s = &r.sensitivity;
        for (i, name) in s.names.iter().enumerate() {
            w.serialize(FlatRow {
                section: "sensitivity",
                target: &r.target,
                variable: name,
                other: "",
                value: s.normalized[i],
                half_width: None,
                rank: Some(s.ranks[i]),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect()
    }

    #[test]
    fn pearson_basics() {
        let m: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -2.0 * i as f64 + 3.0, 4.0]).collect();
        let c = pearson_matrix(&m, &["x", "y", "c"]).unwrap();
        assert_eq!(c.dropped, vec!["c".to_string()]);
        assert_eq!(c.get("x", "x"), Some(1.0));
        assert!((c.get("x", "y").unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_all_constant_is_error() {
        let m = vec![vec![1.0, 2.0]; 5];
        assert!(pearson_matrix(&m, &["a", "b"]).is_err());
        assert!(pearson_matrix(&m[..2], &["a", "b"]).is_err());
    }

    #[test]
    fn shapley_of_constant_model_is_zero() {
        let bg = uniform_rows(20, 3, 1);
        let sv = shapley_values(|p| Ok(vec![2.0; p.len()]), &bg, &bg[..5], 10, 0).unwrap();
        assert!(sv.values.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn shapley_linear_model() {
        let bg = uniform_rows(400, 2, 2);
        let f = |p: &[Vec<f64>]| Ok(p.iter().map(|r| 3.0 * r[0]).collect());
        let rep = shapley_importance(f, &bg, &bg, &["x1", "x2"], 50, 3).unwrap();
        let mean: f64 = bg.iter().map(|r| r[0]).sum::<f64>() / bg.len() as f64;
        let expected = 3.0 * bg.iter().map(|r| (r[0] - mean).abs()).sum::<f64>() / bg.len() as f64;
        assert!((rep.features[0].mean_abs - expected).abs() < 0.05 * expected);
        assert_eq!(rep.features[1].mean_abs, 0.0);
        assert_eq!(rep.features[0].rank, 1);
    }

    #[test]
    fn sensitivity_linear() {
        let f = |p: &[Vec<f64>]| Ok(p.iter().map(|r| 5.0 * r[0] + r[1] + 0.0 * r[2]).collect());
        let rep = sensitivity(f, &[vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]], &[1.0, 1.0, 1.0], &["a", "b", "c"]).unwrap();
        assert!((rep.normalized[0] - 1.0).abs() < 1e-12);
        assert!((rep.normalized[1] - 0.2).abs() < 1e-12);
        assert_eq!(rep.normalized[2], 0.0);
        assert_eq!(rep.ranks, vec![1, 2, 3]);
    }

    #[test]
    fn sensitivity_constant_model() {
        let rep = sensitivity(|p: &[Vec<f64>]| Ok(vec![1.0; p.len()]), &[vec![0.0, 1.0]], &[1.0, 2.0], &["a", "b"]).unwrap();
        assert_eq!(rep.normalized, vec![0.0, 0.0]);
        assert!(sensitivity(|p: &[Vec<f64>]| Ok(vec![1.0; p.len()]), &[vec![0.0]], &[0.0], &["a"]).is_err());
    }

    #[test]
    fn prediction_errors_propagate_with_context() {
        let bg = uniform_rows(5, 2, 0);
        let err = shapley_values(|_| Err(Error::Invalid("boom".into())), &bg, &bg, 3, 0).unwrap_err();
        assert!(err.to_string().contains("boom"));
        assert!(matches!(err, Error::Context { .. }));
    }

    #[test]
    fn random_control_is_uniform_and_seeded() {
        let m = vec![vec![1.0]; 500];
        let a = append_random_control(&m, 4);
        assert_eq!(a, append_random_control(&m, 4));
        assert!(a.iter().all(|r| r.len() == 2 && (0.0..1.0).contains(&r[1])));
        let mean = a.iter().map(|r| r[1]).sum::<f64>() / 500.0;
        assert!((mean - 0.5).abs() < 0.05);
    }
}
