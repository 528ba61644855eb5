//! NSGA-II with SBX crossover, polynomial mutation and problem-supplied repair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pareto::{crowding_distance, dominates, hypervolume_2d, non_dominated_sort};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Config {
    pub population: usize,
    pub generations: usize,
    #[serde(default = "eta_c")]
    pub eta_crossover: f64,
    #[serde(default = "eta_m")]
    pub eta_mutation: f64,
    #[serde(default = "p_c")]
    pub crossover_prob: f64,
    /// Per-gene mutation probability; defaults to `1 / dim`.
    #[serde(default)]
    pub mutation_rate: Option<f64>,
    /// When set (2 objectives only), the hypervolume of every non-dominated
    /// point evaluated so far is recorded after each generation.
    #[serde(default)]
    pub hv_reference: Option<[f64; 2]>,
}

fn eta_c() -> f64 {
    15.0
}
fn eta_m() -> f64 {
    20.0
}
fn p_c() -> f64 {
    0.9
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 200,
            eta_crossover: eta_c(),
            eta_mutation: eta_m(),
            crossover_prob: p_c(),
            mutation_rate: None,
            hv_reference: None,
        }
    }
}

impl Nsga2Config {
    /// Population 500 and 10 000 generations.
    pub fn full_scale() -> Self {
        Self {
            population: 500,
            generations: 10_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::Invalid("NSGA-II population must be at least 4".into()));
        }
        if !(self.eta_crossover >= 0.0 && self.eta_mutation >= 0.0) {
            return Err(Error::Invalid("distribution indices must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::Invalid("crossover_prob must lie in [0, 1]".into()));
        }
        if let Some(r) = self.mutation_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Invalid("mutation_rate must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// A box-bounded minimization problem.
pub trait Problem: Sync {
    fn bounds(&self) -> Vec<(f64, f64)>;

    /// Objective vectors for a batch of decision vectors.
    fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    /// Moves `x` into the feasible set; returns false when that is impossible.
    fn repair(&self, x: &mut [f64]) -> bool {
        for (v, (lo, hi)) in x.iter_mut().zip(self.bounds()) {
            *v = v.clamp(lo, hi);
        }
        true
    }

    fn initial_population(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let bounds = self.bounds();
        Ok((0..n)
            .map(|_| bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Outcome {
    pub population: Vec<Vec<f64>>,
    pub objectives: Vec<Vec<f64>>,
    /// Indices into `population` of the final non-dominated set.
    pub front: Vec<usize>,
    /// Empty unless `hv_reference` was set.
    pub hypervolume_history: Vec<f64>,
}

/// Objective vectors of every non-dominated point seen so far.
#[derive(Default)]
struct Archive {
    members: Vec<Vec<f64>>,
}

impl Archive {
    fn insert(&mut self, objs: &[Vec<f64>]) {
        for o in objs {
            if self.members.iter().any(|m| m == o || dominates(m, o)) {
                continue;
            }
            self.members.retain(|m| !dominates(o, m));
            self.members.push(o.clone());
        }
    }
}

struct Ranked {
    rank: Vec<usize>,
    crowd: Vec<f64>,
}

fn rank_population(objs: &[Vec<f64>]) -> (Vec<Vec<usize>>, Ranked) {
    let fronts = non_dominated_sort(objs);
    let mut rank = vec![0; objs.len()];
    let mut crowd = vec![0.0; objs.len()];
    for (r, f) in fronts.iter().enumerate() {
        let d = crowding_distance(objs, f);
        for (k, &i) in f.iter().enumerate() {
            rank[i] = r;
            crowd[i] = d[k];
        }
    }
    (fronts, Ranked { rank, crowd })
}

fn tournament(r: &Ranked, rng: &mut ChaCha8Rng) -> usize {
    let n = r.rank.len();
    let a = rng.gen_range(0..n);
    let b = rng.gen_range(0..n);
    if r.rank[a] != r.rank[b] {
        return if r.rank[a] < r.rank[b] { a } else { b };
    }
    if r.crowd[a] != r.crowd[b] {
        return if r.crowd[a] > r.crowd[b] { a } else { b };
    }
    if rng.gen_bool(0.5) {
        a
    } else {
        b
    }
}

/// Bounded simulated binary crossover applied gene-wise.
fn sbx(p1: &[f64], p2: &[f64], bounds: &[(f64, f64)], eta: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for i in 0..p1.len() {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let (lo, hi) = bounds[i];
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        if (y2 - y1).abs() < 1e-14 {
            continue;
        }
        let u: f64 = rng.gen();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        let beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        let a = (0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1))).clamp(lo, hi);
        let b = (0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1))).clamp(lo, hi);
        if rng.gen_bool(0.5) {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation.
fn mutate(x: &mut [f64], bounds: &[(f64, f64)], eta: f64, rate: f64, rng: &mut ChaCha8Rng) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        if !rng.gen_bool(rate) {
            continue;
        }
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let d1 = (*v - lo) / width;
        let d2 = (hi - *v) / width;
        let u: f64 = rng.gen();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            val.powf(pow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - val.powf(pow)
        };
        *v = (*v + dq * width).clamp(lo, hi);
    }
}

fn check_objectives(objs: &[Vec<f64>], n: usize) -> Result<()> {
    if objs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: objs.len(),
        });
    }
    if objs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("objective function returned a non-finite value".into()));
    }
    Ok(())
}

pub fn nsga2<P: Problem>(problem: &P, config: &Nsga2Config, seed: u64) -> Result<Nsga2Outcome> {
    config.validate()?;
    let bounds = problem.bounds();
    let d = bounds.len();
    if d == 0 {
        return Err(Error::Invalid("problem has no decision variables".into()));
    }
    let rate = config.mutation_rate.unwrap_or(1.0 / d as f64);
    let n = config.population;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pop = problem.initial_population(n, &mut rng)?;
    if pop.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pop.len(),
        });
    }
    let mut objs = problem.evaluate(&pop)?;
    check_objectives(&objs, n)?;
    let mut hv = Vec::new();
    let mut archive = Archive::default();
    let mut record_hv = |objs: &[Vec<f64>], hv: &mut Vec<f64>| {
        if let Some(reference) = config.hv_reference {
            archive.insert(objs);
            hv.push(hypervolume_2d(&archive.members, reference));
        }
    };
    let (_, mut ranked) = rank_population(&objs);
    record_hv(&objs, &mut hv);

    for _ in 0..config.generations {
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let a = tournament(&ranked, &mut rng);
            let b = tournament(&ranked, &mut rng);
            let (mut c1, mut c2) = if rng.gen_bool(config.crossover_prob) {
                sbx(&pop[a], &pop[b], &bounds, config.eta_crossover, &mut rng)
            } else {
                (pop[a].clone(), pop[b].clone())
            };
            for (child, parent) in [(&mut c1, a), (&mut c2, b)] {
                mutate(child, &bounds, config.eta_mutation, rate, &mut rng);
                if !problem.repair(child) {
                    *child = pop[parent].clone();
                }
            }
            children.push(c1);
            if children.len() < n {
                children.push(c2);
            }
        }
        let child_objs = problem.evaluate(&children)?;
        check_objectives(&child_objs, n)?;
        record_hv(&child_objs, &mut hv);

        let mut all = pop;
        all.extend(children);
        let mut all_objs = objs;
        all_objs.extend(child_objs);
        let (fronts, r) = rank_population(&all_objs);

        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for f in &fronts {
            if keep.len() + f.len() <= n {
                keep.extend(f);
            } else {
                let mut rest = f.clone();
                rest.sort_by(|&a, &b| r.crowd[b].total_cmp(&r.crowd[a]).then(a.cmp(&b)));
                keep.extend(&rest[..n - keep.len()]);
                break;
            }
        }
        pop = keep.iter().map(|&i| all[i].clone()).collect();
        objs = keep.iter().map(|&i| all_objs[i].clone()).collect();
        ranked = rank_population(&objs).1;
    }

    let front = non_dominated_sort(&objs).swap_remove(0);
    Ok(Nsga2Outcome {
        population: pop,
        objectives: objs,
        front,
        hypervolume_history: hv,
    })
}
