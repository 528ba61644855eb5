//! Bagged CART regression forest with out-of-bag scoring and a seeded random
//! hyperparameter search.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::check_rows;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    #[serde(default = "yes")]
    pub bootstrap: bool,
}

fn yes() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 10,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Invalid("forest needs at least one tree".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Invalid("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Invalid("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Row indices drawn for this tree (with repetition when bootstrapping).
    pub sample: Vec<usize>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, n_samples } => Some((*value, *n_samples)),
            Node::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Out-of-bag mean squared error; `None` without bootstrapping or when no row is out of bag.
    pub oob_mse: Option<f64>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let value = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf {
            value,
            n_samples: rows.len(),
        });
        self.nodes.len() - 1
    }

    /// Best (feature, threshold, gain) by weighted variance reduction.
    fn best_split(&self, rows: &mut [usize]) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let leaf = self.params.min_samples_leaf;
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let parent_score = total * total / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let d = self.x[rows[0]].len();
        for f in 0..d {
            rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.y[rows[i]];
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < leaf || n_right < leaf {
                    continue;
                }
                let (lo, hi) = (self.x[rows[i]][f], self.x[rows[i + 1]][f]);
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64;
                let gain = score - parent_score;
                if gain > 1e-12 * parent_score.abs().max(1e-300) && best.is_none_or(|b| gain > b.2) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let at_limit = self.params.max_depth.is_some_and(|m| depth >= m);
        if at_limit || n < self.params.min_samples_split || n < 2 * self.params.min_samples_leaf {
            return self.leaf(rows);
        }
        let Some((feature, threshold, _)) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        let mut left: Vec<usize> = rows.iter().copied().filter(|&r| self.x[r][feature] <= threshold).collect();
        let mut right: Vec<usize> = rows.iter().copied().filter(|&r| self.x[r][feature] > threshold).collect();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: 0.0,
            n_samples: 0,
        });
        let l = self.grow(&mut left, depth + 1);
        let r = self.grow(&mut right, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        id
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64 + 1);
    rng
}

impl ForestModel {
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if inputs.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let d = inputs[0].len();
        check_rows(inputs, d)?;
        if targets.iter().chain(inputs.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("forest inputs and targets must be finite".into()));
        }
        let n = inputs.len();
        let trees: Vec<Tree> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let sample: Vec<usize> = if params.bootstrap {
                    let mut rng = tree_rng(seed, t);
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut rows = sample.clone();
                let mut b = Builder {
                    x: inputs,
                    y: targets,
                    params,
                    nodes: Vec::new(),
                };
                b.grow(&mut rows, 0);
                Tree { nodes: b.nodes, sample }
            })
            .collect();
        let mut model = Self {
            params: *params,
            seed,
            n_features: d,
            trees,
            oob_mse: None,
        };
        if params.bootstrap {
            model.oob_mse = model.oob_error(inputs, targets);
        }
        Ok(model)
    }

    fn oob_error(&self, x: &[Vec<f64>], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let mut in_bag = vec![vec![false; n]; self.trees.len()];
        for (t, tree) in self.trees.iter().enumerate() {
            for &r in &tree.sample {
                in_bag[t][r] = true;
            }
        }
        let mut sse = 0.0;
        let mut count = 0usize;
        for r in 0..n {
            let preds: Vec<f64> = self
                .trees
                .iter()
                .enumerate()
                .filter(|(t, _)| !in_bag[*t][r])
                .map(|(_, tree)| tree.predict_row(&x[r]))
                .collect();
            if preds.is_empty() {
                continue;
            }
            let mean = preds.iter().sum::<f64>() / preds.len() as f64;
            sse += (mean - y[r]).powi(2);
            count += 1;
        }
        (count > 0).then(|| sse / count as f64)
    }

    pub fn predict(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_rows(points, self.n_features)?;
        Ok(points
            .par_iter()
            .map(|p| self.trees.iter().map(|t| t.predict_row(p)).sum::<f64>() / self.trees.len() as f64)
            .collect())
    }
}

pub fn forest_fit(inputs: &[Vec<f64>], targets: &[f64], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    ForestModel::fit(inputs, targets, params, seed)
}

pub fn forest_predict(model: &ForestModel, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.predict(points)
}

/// Candidate values for the random hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestSearchSpace {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub n_trials: usize,
}

impl Default for ForestSearchSpace {
    fn default() -> Self {
        Self {
            n_trees: vec![10, 25, 50, 100, 200],
            max_depth: vec![None, Some(3), Some(5), Some(8), Some(12)],
            min_samples_split: vec![2, 4, 6, 10],
            min_samples_leaf: vec![1, 2, 3, 5],
            n_trials: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrial {
    pub params: ForestParams,
    pub oob_mse: Option<f64>,
}

/// Random search scored by OOB error. The default parameters are always the
/// first trial, and every trial uses the same seed, so the winner is never
/// worse out of bag than the untuned baseline.
pub fn tune_forest(
    inputs: &[Vec<f64>],
    targets: &[f64],
    space: &ForestSearchSpace,
    seed: u64,
) -> Result<(ForestModel, Vec<SearchTrial>)> {
    if space.n_trees.is_empty()
        || space.max_depth.is_empty()
        || space.min_samples_split.is_empty()
        || space.min_samples_leaf.is_empty()
    {
        return Err(Error::Invalid("forest search space has an empty axis".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f0e5);
    let mut candidates = vec![ForestParams::default()];
    for _ in 1..space.n_trials.max(1) {
        candidates.push(ForestParams {
            n_trees: *space.n_trees.choose(&mut rng).unwrap(),
            max_depth: *space.max_depth.choose(&mut rng).unwrap(),
            min_samples_split: *space.min_samples_split.choose(&mut rng).unwrap(),
            min_samples_leaf: *space.min_samples_leaf.choose(&mut rng).unwrap(),
            bootstrap: true,
        });
    }
    let mut best: Option<ForestModel> = None;
    let mut trials = Vec::with_capacity(candidates.len());
    for params in candidates {
        let model = ForestModel::fit(inputs, targets, &params, seed)?;
        trials.push(SearchTrial {
            params,
            oob_mse: model.oob_mse,
        });
        let better = match (&best, model.oob_mse) {
            (None, _) => true,
            (Some(b), Some(m)) => b.oob_mse.is_none_or(|bm| m < bm),
            (Some(_), None) => false,
        };
        if better {
            best = Some(model);
        }
    }
    Ok((best.expect("at least one trial"), trials))
}
