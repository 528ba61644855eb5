//! Policy-comparison study: simulated campaigns against a GP oracle, with
//! random or UCB acquisition over informed and uninformed candidate pools.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{label_grade, Feature, FeatureSource, GradeSpec};
use crate::error::{Error, Result};
use crate::sampling::{lhc_sample, ConditionPoint, SurrogateSpaceSpec};
use crate::seeds::derive_seed;
use crate::surrogate::{GpClassifier, GpConfig, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Random,
    Ucb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Informed,
    Uninformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arm {
    pub policy: Policy,
    pub space: PoolKind,
}

impl Arm {
    /// Report order: informed before uninformed, UCB before random.
    pub const ALL: [Arm; 4] = [
        Arm {
            policy: Policy::Ucb,
            space: PoolKind::Informed,
        },
        Arm {
            policy: Policy::Random,
            space: PoolKind::Informed,
        },
        Arm {
            policy: Policy::Ucb,
            space: PoolKind::Uninformed,
        },
        Arm {
            policy: Policy::Random,
            space: PoolKind::Uninformed,
        },
    ];
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.space {
            PoolKind::Informed => "informed",
            PoolKind::Uninformed => "uninformed",
        };
        let p = match self.policy {
            Policy::Random => "random",
            Policy::Ucb => "ucb",
        };
        write!(f, "{s}_{p}")
    }
}

/// The simulated ground truth: a GP classifier on the full labelled table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub features: Vec<Feature>,
    pub length_scale: f64,
    pub alpha: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            features: Feature::ALL.to_vec(),
            length_scale: 1.0,
            alpha: 0.06,
        }
    }
}

/// What the UCB learner is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// The oracle's probability at each queried point.
    #[default]
    Soft,
    /// Thresholded 0/1 outcomes; random draws until both classes are seen.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub length_scale: f64,
    pub alpha: f64,
    pub kappa: f64,
    /// Uniform draws before the first model-guided query.
    pub n_initial: usize,
    pub labels: LabelMode,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            length_scale: 1.0,
            alpha: 0.06,
            kappa: 2.0,
            n_initial: 2,
            labels: LabelMode::Soft,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub informed: SurrogateSpaceSpec,
    pub uninformed: SurrogateSpaceSpec,
    pub pool_size: usize,
    pub n_instances: usize,
    pub budget: usize,
    /// A success also needs initial Mg strictly above this.
    pub min_init_mg: f64,
    pub base_seed: u64,
    #[serde(default)]
    pub grade: GradeSpec,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.informed.validate()?;
        self.uninformed.validate()?;
        self.grade.validate()?;
        if self.budget == 0 || self.n_instances == 0 || self.pool_size == 0 {
            return Err(Error::Invalid("budget, n_instances and pool_size must be at least 1".into()));
        }
        if self.oracle.features.is_empty() || !(self.oracle.length_scale > 0.0 && self.oracle.alpha > 0.0) {
            return Err(Error::Invalid("oracle needs features and positive length scale and alpha".into()));
        }
        let l = &self.learner;
        if !(l.length_scale > 0.0 && l.alpha > 0.0 && l.kappa >= 0.0) {
            return Err(Error::Invalid("learner length scale and alpha must be positive, kappa non-negative".into()));
        }
        Ok(())
    }
}

/// Oracle trained on the non-excluded records, with features standardized
/// over those records.
pub fn train_oracle<S: FeatureSource>(
    records: &[S],
    labels: &[bool],
    config: &OracleConfig,
) -> Result<GpClassifier> {
    let x: Vec<Vec<f64>> = records.iter().map(|r| r.feature_vector(&config.features)).collect();
    let gp = GpConfig::fixed(
        KernelSpec::rbf(vec![config.length_scale; config.features.len()]),
        config.alpha,
    );
    GpClassifier::fit(&x, labels, &gp, 0).map_err(|e| e.context("training oracle"))
}

/// Oracle from the bundled experiment table.
pub fn bundled_oracle(config: &OracleConfig, grade: &GradeSpec) -> Result<GpClassifier> {
    let records: Vec<_> = crate::bundled::records()?.into_iter().filter(|r| !r.excluded).collect();
    let labels: Vec<bool> = records.iter().map(|r| label_grade(&r.product, grade)).collect();
    train_oracle(&records, &labels, config)
}

/// A labelled candidate pool. `scaled` holds the oracle-scaled features the
/// learner works in.
#[derive(Debug, Clone)]
pub struct Pool {
    pub scaled: Vec<Vec<f64>>,
    pub probability: Vec<f64>,
    pub init_mg: Vec<f64>,
}

impl Pool {
    pub fn from_points(points: &[ConditionPoint], oracle: &GpClassifier, features: &[Feature]) -> Result<Self> {
        let x: Vec<Vec<f64>> = points.iter().map(|p| p.feature_vector(features)).collect();
        let probability = oracle.predict_proba(&x)?;
        let scaled = oracle.inner.scaler().transform(&x)?;
        Ok(Pool {
            scaled,
            probability,
            init_mg: points.iter().map(|p| p.initial.mg).collect(),
        })
    }

    pub fn from_parts(scaled: Vec<Vec<f64>>, probability: Vec<f64>, init_mg: Vec<f64>) -> Result<Self> {
        if scaled.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if probability.len() != scaled.len() || init_mg.len() != scaled.len() {
            return Err(Error::DimensionMismatch {
                expected: scaled.len(),
                got: probability.len().min(init_mg.len()),
            });
        }
        Ok(Pool {
            scaled,
            probability,
            init_mg,
        })
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }

    pub fn is_success(&self, i: usize, threshold: f64, min_init_mg: f64) -> bool {
        self.probability[i] >= threshold && self.init_mg[i] > min_init_mg
    }

    pub fn success_fraction(&self, threshold: f64, min_init_mg: f64) -> f64 {
        (0..self.len()).filter(|&i| self.is_success(i, threshold, min_init_mg)).count() as f64 / self.len() as f64
    }
}

/// Latin-hypercube pools over the two spaces, each resized to `pool_size`.
pub fn build_pools(
    informed: &SurrogateSpaceSpec,
    uninformed: &SurrogateSpaceSpec,
    pool_size: usize,
    seed: u64,
) -> Result<(Vec<ConditionPoint>, Vec<ConditionPoint>)> {
    let mut a = informed.clone();
    a.n_points = pool_size;
    let mut b = uninformed.clone();
    b.n_points = pool_size;
    let inf = lhc_sample(&a, derive_seed(seed, 1)).map_err(|e| e.context("informed pool"))?;
    let unf = lhc_sample(&b, derive_seed(seed, 2)).map_err(|e| e.context("uninformed pool"))?;
    Ok((inf, unf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub index: usize,
    pub probability: f64,
    pub init_mg: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub queries: Vec<Query>,
    /// Number of experiments until the first success; `None` when censored.
    pub experiments_to_success: Option<usize>,
}

/// GP posterior over the whole pool, updated one query at a time. Keeps
/// `V = L^{-1} K(Q, pool)`, so each new query costs one pass over the pool.
struct IncrementalGp<'a> {
    pool: &'a [Vec<f64>],
    kernel: KernelSpec,
    alpha: f64,
    queried: Vec<usize>,
    /// Lower-triangular factor rows.
    l: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl<'a> IncrementalGp<'a> {
    fn new(pool: &'a [Vec<f64>], length_scale: f64, alpha: f64) -> Self {
        let d = pool.first().map_or(0, Vec::len);
        Self {
            pool,
            kernel: KernelSpec::rbf(vec![length_scale; d]),
            alpha,
            queried: Vec::new(),
            l: Vec::new(),
            v: Vec::new(),
        }
    }

    fn add(&mut self, i: usize) -> Result<()> {
        let xi = &self.pool[i];
        let q = self.queried.len();
        let k_q: Vec<f64> = self
            .queried
            .iter()
            .map(|&j| self.kernel.eval_unchecked(&self.pool[j], xi))
            .collect();
        // forward-substitute for the new factor row
        let mut row = vec![0.0; q + 1];
        for a in 0..q {
            let s: f64 = (0..a).map(|b| self.l[a][b] * row[b]).sum();
            row[a] = (k_q[a] - s) / self.l[a][a];
        }
        let diag = self.kernel.signal_variance + self.alpha - row[..q].iter().map(|r| r * r).sum::<f64>();
        if !(diag > 0.0) {
            return Err(Error::Conditioning(format!("learner factor lost positivity at query {q}")));
        }
        row[q] = diag.sqrt();
        let kernel = &self.kernel;
        let v = &self.v;
        let new_v: Vec<f64> = self
            .pool
            .par_iter()
            .enumerate()
            .map(|(p, x)| {
                let k = kernel.eval_unchecked(xi, x);
                let s: f64 = (0..q).map(|a| row[a] * v[a][p]).sum();
                (k - s) / row[q]
            })
            .collect();
        self.queried.push(i);
        self.l.push(row);
        self.v.push(new_v);
        Ok(())
    }

    /// Posterior mean and std over the pool; the prior mean is the target mean.
    fn posterior(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let q = self.queried.len();
        let y_mean = y.iter().sum::<f64>() / q as f64;
        let mut b = vec![0.0; q];
        for a in 0..q {
            let s: f64 = (0..a).map(|c| self.l[a][c] * b[c]).sum();
            b[a] = (y[a] - y_mean - s) / self.l[a][a];
        }
        let sv = self.kernel.signal_variance;
        (0..self.pool.len())
            .into_par_iter()
            .map(|p| {
                let mut m = y_mean;
                let mut explained = 0.0;
                for a in 0..q {
                    let va = self.v[a][p];
                    m += va * b[a];
                    explained += va * va;
                }
                (m, (sv - explained).max(0.0).sqrt())
            })
            .unzip()
    }
}

fn draw_unqueried(rng: &mut ChaCha8Rng, n: usize, queried: &[bool]) -> usize {
    loop {
        let i = rng.gen_range(0..n);
        if !queried[i] {
            return i;
        }
    }
}

/// One simulated campaign of at most `budget` experiments.
pub fn run_instance(
    pool: &Pool,
    policy: Policy,
    learner: &LearnerConfig,
    budget: usize,
    threshold: f64,
    min_init_mg: f64,
    seed: u64,
) -> Result<Trajectory> {
    if pool.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if budget == 0 {
        return Err(Error::Invalid("budget must be at least 1".into()));
    }
    let n = pool.len();
    let budget = budget.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(budget);
    let order: Vec<usize> = match policy {
        Policy::Random => sample_indices(&mut rng, n, budget).into_vec(),
        Policy::Ucb => Vec::new(),
    };
    let mut queried = vec![false; n];
    let mut gp = IncrementalGp::new(&pool.scaled, learner.length_scale, learner.alpha);
    let mut y = Vec::with_capacity(budget);
    for t in 0..budget {
        let i = match policy {
            Policy::Random => order[t],
            Policy::Ucb => {
                let both = y.iter().any(|v: &f64| *v >= 0.5) && y.iter().any(|v: &f64| *v < 0.5);
                let guided = t >= learner.n_initial && (learner.labels == LabelMode::Soft || both);
                if guided {
                    let (mean, std) = gp.posterior(&y);
                    let mut best = None;
                    let mut best_score = f64::NEG_INFINITY;
                    for p in 0..n {
                        if queried[p] {
                            continue;
                        }
                        let s = mean[p] + learner.kappa * std[p];
                        if s > best_score {
                            best_score = s;
                            best = Some(p);
                        }
                    }
                    best.expect("budget is capped at the pool size")
                } else {
                    draw_unqueried(&mut rng, n, &queried)
                }
            }
        };
        queried[i] = true;
        let success = pool.is_success(i, threshold, min_init_mg);
        queries.push(Query {
            index: i,
            probability: pool.probability[i],
            init_mg: pool.init_mg[i],
            success,
        });
        if success {
            return Ok(Trajectory {
                seed,
                queries,
                experiments_to_success: Some(t + 1),
            });
        }
        if policy == Policy::Ucb {
            gp.add(i)?;
            y.push(match learner.labels {
                LabelMode::Soft => pool.probability[i],
                LabelMode::Hard => f64::from(u8::from(pool.probability[i] >= threshold)),
            });
        }
    }
    Ok(Trajectory {
        seed,
        queries,
        experiments_to_success: None,
    })
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub successes: usize,
    pub n_instances: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fraction of the pool that would count as a success.
    pub pool_success_fraction: f64,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub arms: Vec<ArmResult>,
}

impl StudyResult {
    pub fn arm(&self, policy: Policy, space: PoolKind) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm.policy == policy && a.arm.space == space)
    }

    pub fn rate(&self, policy: Policy, space: PoolKind) -> f64 {
        self.arm(policy, space).map_or(f64::NAN, |a| a.rate)
    }

    /// Informed-UCB > Informed-Random >= Uninformed-UCB > Uninformed-Random.
    pub fn ordering_holds(&self) -> bool {
        let iu = self.rate(Policy::Ucb, PoolKind::Informed);
        let ir = self.rate(Policy::Random, PoolKind::Informed);
        let uu = self.rate(Policy::Ucb, PoolKind::Uninformed);
        let ur = self.rate(Policy::Random, PoolKind::Uninformed);
        iu > ir && ir >= uu && uu > ur
    }
}

/// Runs all four arms against `oracle`.
pub fn run_study_with_oracle(config: &StudyConfig, oracle: &GpClassifier) -> Result<StudyResult> {
    config.validate()?;
    let (inf_points, unf_points) = build_pools(&config.informed, &config.uninformed, config.pool_size, config.base_seed)?;
    let informed = Pool::from_points(&inf_points, oracle, &config.oracle.features)?;
    let uninformed = Pool::from_points(&unf_points, oracle, &config.oracle.features)?;
    drop((inf_points, unf_points));
    let threshold = oracle.threshold;
    let mut arms = Vec::with_capacity(4);
    for (a, arm) in Arm::ALL.into_iter().enumerate() {
        let pool = match arm.space {
            PoolKind::Informed => &informed,
            PoolKind::Uninformed => &uninformed,
        };
        let trajectories: Vec<Trajectory> = (0..config.n_instances)
            .map(|k| {
                let seed = derive_seed(config.base_seed, 1000 * (a as u64 + 1) + k as u64);
                run_instance(
                    pool,
                    arm.policy,
                    &config.learner,
                    config.budget,
                    threshold,
                    config.min_init_mg,
                    seed,
                )
                .map_err(|e| e.context(format!("arm {arm}, instance {k}")))
            })
            .collect::<Result<_>>()?;
        let successes = trajectories.iter().filter(|t| t.experiments_to_success.is_some()).count();
        let (ci_low, ci_high) = wilson_interval(successes, config.n_instances);
        tracing::info!(%arm, successes, n = config.n_instances, "arm finished");
        arms.push(ArmResult {
            arm,
            successes,
            n_instances: config.n_instances,
            rate: successes as f64 / config.n_instances as f64,
            ci_low,
            ci_high,
            pool_success_fraction: pool.success_fraction(threshold, config.min_init_mg),
            trajectories,
        });
    }
    Ok(StudyResult {
        config: config.clone(),
        arms,
    })
}

/// Runs the study with the oracle trained on the bundled experiment table.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let oracle = bundled_oracle(&config.oracle, &config.grade)?;
    run_study_with_oracle(config, &oracle)
}

pub fn write_rates_csv<W: Write>(sink: W, result: &StudyResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["arm", "policy", "space", "successes", "n_instances", "rate", "ci_low", "ci_high", "pool_success_fraction"])?;
    for a in &result.arms {
        w.write_record([
            a.arm.to_string(),
            format!("{:?}", a.arm.policy).to_lowercase(),
            format!("{:?}", a.arm.space).to_lowercase(),
            a.successes.to_string(),
            a.n_instances.to_string(),
            a.rate.to_string(),
            a.ci_low.to_string(),
            a.ci_high.to_string(),
            a.pool_success_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectories_csv<W: Write>(sink: W, result: &StudyResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["arm", "instance", "seed", "n_queries", "experiments_to_success", "censored"])?;
    for a in &result.arms {
        for (k, t) in a.trajectories.iter().enumerate() {
            w.write_record([
                a.arm.to_string(),
                k.to_string(),
                t.seed.to_string(),
                t.queries.len().to_string(),
                t.experiments_to_success.map(|v| v.to_string()).unwrap_or_default(),
                t.experiments_to_success.is_none().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `study_result.json`, `rates.csv` and `trajectories.csv` into `dir`.
pub fn write_outputs(dir: &Path, result: &StudyResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join("study_result.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), result)?;
    write_rates_csv(std::fs::File::create(dir.join("rates.csv"))?, result)?;
    write_trajectories_csv(std::fs::File::create(dir.join("trajectories.csv"))?, result)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureScaler;
    use crate::surrogate::GpModel;

    fn grid_pool(n: usize, p: impl Fn(f64) -> f64) -> Pool {
        let scaled: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 * 4.0 - 2.0]).collect();
        let probability = scaled.iter().map(|x| p(x[0])).collect();
        Pool::from_parts(scaled, probability, vec![500.0; n]).unwrap()
    }

    #[test]
    fn incremental_posterior_matches_full_fit() {
        let pool: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let mut gp = IncrementalGp::new(&pool, 0.8, 0.06);
        let picks = [3, 17, 42, 8, 29];
        let y = [0.1, 0.9, 0.4, 0.0, 0.7];
        for &i in &picks {
            gp.add(i).unwrap();
        }
        let (mean, std) = gp.posterior(&y);
        let x: Vec<Vec<f64>> = picks.iter().map(|&i| pool[i].clone()).collect();
        let full = GpModel::fit_scaled(
            x,
            &y,
            FeatureScaler::identity(2),
            &GpConfig::fixed(KernelSpec::rbf(vec![0.8, 0.8]), 0.06),
            0,
        )
        .unwrap();
        let want = full.predict_prescaled(&pool).unwrap();
        for p in 0..pool.len() {
            assert!((mean[p] - want[p].mean).abs() < 1e-10);
            assert!((std[p] - want[p].std).abs() < 1e-8);
        }
    }

    #[test]
    fn single_true_point_found_in_one() {
        let pool = Pool::from_parts(vec![vec![0.0]], vec![0.9], vec![300.0]).unwrap();
        for policy in [Policy::Random, Policy::Ucb] {
            let t = run_instance(&pool, policy, &LearnerConfig::default(), 1, 0.5, 200.0, 1).unwrap();
            assert_eq!(t.experiments_to_success, Some(1));
        }
    }

    #[test]
    fn no_true_points_is_censored() {
        let pool = grid_pool(200, |_| 0.1);
        for policy in [Policy::Random, Policy::Ucb] {
            let t = run_instance(&pool, policy, &LearnerConfig::default(), 40, 0.5, 200.0, 9).unwrap();
            assert_eq!(t.experiments_to_success, None);
            assert_eq!(t.queries.len(), 40);
        }
    }

    #[test]
    fn low_mg_does_not_count() {
        let pool = Pool::from_parts(vec![vec![0.0]], vec![0.9], vec![150.0]).unwrap();
        let t = run_instance(&pool, Policy::Random, &LearnerConfig::default(), 1, 0.5, 200.0, 1).unwrap();
        assert_eq!(t.experiments_to_success, None);
    }

    #[test]
    fn ucb_never_requeries_and_is_deterministic() {
        let pool = grid_pool(300, |x| if x > 1.9 { 0.8 } else { 0.2 * (-x * x).exp() });
        for labels in [LabelMode::Soft, LabelMode::Hard] {
            let learner = LearnerConfig {
                labels,
                ..LearnerConfig::default()
            };
            let a = run_instance(&pool, Policy::Ucb, &learner, 40, 0.5, 200.0, 5).unwrap();
            let b = run_instance(&pool, Policy::Ucb, &learner, 40, 0.5, 200.0, 5).unwrap();
            assert_eq!(a, b);
            let mut idx: Vec<usize> = a.queries.iter().map(|q| q.index).collect();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), a.queries.len());
        }
    }

    #[test]
    fn budget_capped_at_pool_size() {
        let pool = grid_pool(5, |_| 0.0);
        let t = run_instance(&pool, Policy::Ucb, &LearnerConfig::default(), 40, 0.5, 200.0, 2).unwrap();
        assert_eq!(t.queries.len(), 5);
    }

    #[test]
    fn random_policy_matches_hypergeometric_rate() {
        // 1000 points, 20 successes, budget 10: P(hit) = 1 - C(980,10)/C(1000,10)
        let pool = grid_pool(1000, |x| if x > 1.918 { 0.9 } else { 0.1 });
        let k = (0..1000).filter(|&i| pool.probability[i] >= 0.5).count();
        assert_eq!(k, 20);
        let miss: f64 = (0..10).map(|j| (980.0 - j as f64) / (1000.0 - j as f64)).product();
        let expected = 1.0 - miss;
        let n = 2000;
        let hits = (0..n)
            .filter(|&s| {
                run_instance(&pool, Policy::Random, &LearnerConfig::default(), 10, 0.5, 200.0, s as u64)
                    .unwrap()
                    .experiments_to_success
                    .is_some()
            })
            .count();
        let rate = hits as f64 / n as f64;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((rate - expected).abs() < 3.0 * sigma, "rate {rate} vs {expected}");
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo.abs() < 1e-15);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson_interval(67, 100);
        assert!(lo < 0.67 && hi > 0.67);
        // Wilson interval for 50/100 is symmetric about 0.5
        let (lo, hi) = wilson_interval(50, 100);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn one_instance_rates_are_binary() {
        let mut config = crate::bundled::study_config().unwrap();
        config.pool_size = 500;
        config.n_instances = 1;
        config.budget = 5;
        let r = run_study(&config).unwrap();
        assert_eq!(r.arms.len(), 4);
        for a in &r.arms {
            assert!(a.rate == 0.0 || a.rate == 1.0);
        }
    }

    #[test]
    fn informed_pool_is_high_mg() {
        let config = crate::bundled::study_config().unwrap();
        let (inf, unf) = build_pools(&config.informed, &config.uninformed, 2000, 3).unwrap();
        assert!(inf.iter().all(|p| p.initial.mg > 200.0 && p.controls.t_cold >= 55.0));
        assert!(unf.iter().all(|p| config.uninformed.within_bounds(&p.coords())));
    }
}
