//! Candidate batches and the strategies that fill them.

use std::collections::BTreeMap;
use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nsga2::{nsga2, Nsga2Config, Problem};
use crate::dataset::{label_grade, ExperimentRecord, Feature, FeatureScaler, FeatureSource, GradeSpec};
use crate::error::{Error, Result};
use crate::sampling::{lhc_sample, ConditionPoint, Coords, Dim, Provenance, SurrogateSpaceSpec, N_DIMS};
use crate::surrogate::{GpClassifier, Prediction, UncertainModel};

/// Largest fraction of a dimension's range a midpoint may be moved by repair.
pub const MAX_REPAIR_FRACTION: f64 = 0.10;
/// Scaled distance below which two midpoints are duplicates.
pub const DEDUP_DISTANCE: f64 = 1e-6;
pub const DEFAULT_KAPPA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    ParetoExploration,
    RandomWalkVerification,
    BoundaryMidpoint,
    #[serde(rename = "UCB")]
    Ucb,
    Manual,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::ParetoExploration => "pareto",
            Strategy::RandomWalkVerification => "walk",
            Strategy::BoundaryMidpoint => "midpoint",
            Strategy::Ucb => "ucb",
            Strategy::Manual => "manual",
        }
    }

    pub fn from_name(name: &str) -> Option<Strategy> {
        [
            Strategy::ParetoExploration,
            Strategy::RandomWalkVerification,
            Strategy::BoundaryMidpoint,
            Strategy::Ucb,
            Strategy::Manual,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ReviewStatus {
    #[default]
    Proposed,
    Approved,
    Rejected,
    Edited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub point: ConditionPoint,
    /// Per-target predicted mean and std.
    pub predictions: BTreeMap<String, Prediction>,
    /// Battery-grade probability, when a classifier was available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    pub score: f64,
    #[serde(default)]
    pub review_status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_point: Option<ConditionPoint>,
    /// Experiment that ran this candidate, once ingested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_exp_id: Option<u32>,
}

impl Candidate {
    pub fn new(id: usize, point: ConditionPoint, score: f64) -> Self {
        Self {
            id,
            point,
            predictions: BTreeMap::new(),
            probability: None,
            score,
            review_status: ReviewStatus::Proposed,
            edited_point: None,
            result_exp_id: None,
        }
    }

    /// The point that should actually be run: the edit when present.
    pub fn effective_point(&self) -> &ConditionPoint {
        self.edited_point.as_ref().unwrap_or(&self.point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateBatch {
    pub id: usize,
    pub iteration: usize,
    pub strategy: Strategy,
    pub candidates: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CandidateBatch {
    pub fn new(strategy: Strategy, candidates: Vec<Candidate>) -> Result<Self> {
        let batch = Self {
            id: 0,
            iteration: 0,
            strategy,
            candidates,
            notes: Vec::new(),
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Invalid("candidate batch is empty".into()));
        }
        if let Some(c) = self.candidates.iter().find(|c| !c.score.is_finite()) {
            return Err(Error::Invalid(format!("candidate {} has a non-finite score", c.id)));
        }
        Ok(())
    }

    pub fn get(&self, candidate: usize) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == candidate)
    }

    pub fn get_mut(&mut self, candidate: usize) -> Option<&mut Candidate> {
        self.candidates.iter_mut().find(|c| c.id == candidate)
    }

    /// Attaches per-target predictions to every candidate.
    pub fn annotate<M: UncertainModel + ?Sized>(&mut self, target: &str, model: &M, features: &[Feature]) -> Result<()> {
        let x: Vec<Vec<f64>> = self.candidates.iter().map(|c| c.point.feature_vector(features)).collect();
        for (c, p) in self.candidates.iter_mut().zip(model.predict(&x)?) {
            c.predictions.insert(target.to_string(), p);
        }
        Ok(())
    }

    pub fn annotate_probability(&mut self, clf: &GpClassifier, features: &[Feature]) -> Result<()> {
        let x: Vec<Vec<f64>> = self.candidates.iter().map(|c| c.point.feature_vector(features)).collect();
        for (c, p) in self.candidates.iter_mut().zip(clf.predict_proba(&x)?) {
            c.probability = Some(p);
        }
        Ok(())
    }

    /// Flat CSV: one row per candidate with coordinates, score, status and
    /// one mean/std column pair per predicted target.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let targets: Vec<String> = self
            .candidates
            .iter()
            .flat_map(|c| c.predictions.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut w = csv::Writer::from_writer(sink);
        let mut header: Vec<String> = vec!["batch".into(), "candidate".into(), "strategy".into()];
        header.extend(Dim::ALL.iter().map(|d| d.name().to_string()));
        header.extend(["probability", "score", "review_status"].map(String::from));
        for t in &targets {
            header.push(format!("{t}_mean"));
            header.push(format!("{t}_std"));
        }
        w.write_record(&header)?;
        for c in &self.candidates {
            let mut row = vec![self.id.to_string(), c.id.to_string(), self.strategy.name().to_string()];
            row.extend(c.effective_point().coords().iter().map(|v| v.to_string()));
            row.push(c.probability.map(|p| p.to_string()).unwrap_or_default());
            row.push(c.score.to_string());
            row.push(format!("{:?}", c.review_status));
            for t in &targets {
                match c.predictions.get(t) {
                    Some(p) => {
                        row.push(p.mean.to_string());
                        row.push(p.std.to_string());
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Pareto exploration

/// A named objective over condition points (minimized through its mean).
pub trait ObjectiveFn: Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, points: &[ConditionPoint]) -> Result<Vec<Prediction>>;
}

/// Predicted mean of a regressor over a fixed feature list.
pub struct ModelObjective<'a, M: UncertainModel + ?Sized> {
    pub name: String,
    pub model: &'a M,
    pub features: Vec<Feature>,
}

impl<M: UncertainModel + ?Sized> ObjectiveFn for ModelObjective<'_, M> {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, points: &[ConditionPoint]) -> Result<Vec<Prediction>> {
        let x: Vec<Vec<f64>> = points.iter().map(|p| p.feature_vector(&self.features)).collect();
        self.model.predict(&x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub point: ConditionPoint,
    pub objectives: Vec<f64>,
    pub stds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub objective_names: Vec<String>,
    pub members: Vec<FrontMember>,
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hypervolume_history: Vec<f64>,
}

struct SpaceProblem<'a> {
    spec: &'a SurrogateSpaceSpec,
    objectives: &'a [&'a dyn ObjectiveFn],
    seed: u64,
}

fn to_coords(x: &[f64]) -> Coords {
    let mut c = [0.0; N_DIMS];
    c.copy_from_slice(x);
    c
}

impl Problem for SpaceProblem<'_> {
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.spec.bounds().to_vec()
    }

    fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let points: Vec<ConditionPoint> = xs
            .iter()
            .map(|x| ConditionPoint::from_coords(&to_coords(x), Provenance::Nsga2))
            .collect();
        let mut out = vec![Vec::with_capacity(self.objectives.len()); xs.len()];
        for obj in self.objectives {
            let preds = obj.evaluate(&points).map_err(|e| e.context(format!("evaluating objective {}", obj.name())))?;
            for (row, p) in out.iter_mut().zip(preds) {
                row.push(p.mean);
            }
        }
        Ok(out)
    }

    fn repair(&self, x: &mut [f64]) -> bool {
        let fixed = self.spec.repair(&to_coords(x));
        x.copy_from_slice(&fixed);
        self.spec.contains(&fixed)
    }

    fn initial_population(&self, n: usize, _rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let mut spec = self.spec.clone();
        spec.n_points = n;
        Ok(lhc_sample(&spec, self.seed)?.iter().map(|p| p.coords().to_vec()).collect())
    }
}

/// NSGA-II over the constrained surrogate space, minimizing each objective's
/// predicted mean. The initial population is a constrained Latin hypercube.
pub fn nsga2_pareto(
    spec: &SurrogateSpaceSpec,
    objectives: &[&dyn ObjectiveFn],
    config: &Nsga2Config,
    seed: u64,
) -> Result<ParetoFront> {
    spec.validate()?;
    if objectives.len() < 2 {
        return Err(Error::Invalid("Pareto search needs at least two objectives".into()));
    }
    let problem = SpaceProblem { spec, objectives, seed };
    let out = nsga2(&problem, config, seed)?;

    let mut seen: Vec<Coords> = Vec::new();
    let mut points = Vec::new();
    for &i in &out.front {
        let c = to_coords(&out.population[i]);
        if seen.contains(&c) {
            continue;
        }
        seen.push(c);
        points.push(ConditionPoint::from_coords(&c, Provenance::Nsga2));
    }
    let mut members: Vec<FrontMember> = points
        .into_iter()
        .map(|point| FrontMember {
            point,
            objectives: Vec::new(),
            stds: Vec::new(),
        })
        .collect();
    let pts: Vec<ConditionPoint> = members.iter().map(|m| m.point.clone()).collect();
    for obj in objectives {
        for (m, p) in members.iter_mut().zip(obj.evaluate(&pts)?) {
            m.objectives.push(p.mean);
            m.stds.push(p.std);
        }
    }
    Ok(ParetoFront {
        objective_names: objectives.iter().map(|o| o.name().to_string()).collect(),
        members,
        population: config.population,
        generations: config.generations,
        seed,
        hypervolume_history: out.hypervolume_history,
    })
}

/// Indices of `k` members chosen by farthest-point selection in min-max
/// normalized objective space, seeded with each objective's minimizer.
/// Returned in ascending index order.
pub fn farthest_point_subset(objectives: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = objectives.len();
    if k >= n {
        return (0..n).collect();
    }
    if k == 0 {
        return Vec::new();
    }
    let m = objectives[0].len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for o in objectives {
        for j in 0..m {
            lo[j] = lo[j].min(o[j]);
            hi[j] = hi[j].max(o[j]);
        }
    }
    let norm: Vec<Vec<f64>> = objectives
        .iter()
        .map(|o| {
            (0..m)
                .map(|j| if hi[j] > lo[j] { (o[j] - lo[j]) / (hi[j] - lo[j]) } else { 0.0 })
                .collect()
        })
        .collect();
    let dist = |a: usize, b: usize| -> f64 {
        norm[a].iter().zip(&norm[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in 0..m {
        if chosen.len() == k {
            break;
        }
        let best = (0..n)
            .min_by(|&a, &b| objectives[a][j].total_cmp(&objectives[b][j]).then(a.cmp(&b)))
            .unwrap();
        if !chosen.contains(&best) {
            chosen.push(best);
        }
    }
    let mut min_d: Vec<f64> = (0..n).map(|i| chosen.iter().map(|&c| dist(i, c)).fold(f64::INFINITY, f64::min)).collect();
    while chosen.len() < k {
        let next = (0..n)
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| min_d[a].total_cmp(&min_d[b]).then(b.cmp(&a)))
            .unwrap();
        chosen.push(next);
        for i in 0..n {
            min_d[i] = min_d[i].min(dist(i, next));
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Spread-maximizing subset of the front as a Pareto-exploration batch.
/// Scores are the normalized farthest-point selection order (0 is first).
pub fn pareto_candidates(front: &ParetoFront, k: usize) -> Result<CandidateBatch> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if front.members.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let objs: Vec<Vec<f64>> = front.members.iter().map(|m| m.objectives.clone()).collect();
    let mut notes = Vec::new();
    if k > objs.len() {
        let msg = format!("requested {k} candidates but the front has only {}; returning the whole front", objs.len());
        tracing::warn!("{msg}");
        notes.push(msg);
    }
    let chosen = farthest_point_subset(&objs, k);
    let candidates = chosen
        .iter()
        .enumerate()
        .map(|(id, &i)| {
            let m = &front.members[i];
            let mut c = Candidate::new(id, m.point.clone(), m.objectives.iter().sum());
            for (j, name) in front.objective_names.iter().enumerate() {
                c.predictions.insert(
                    name.clone(),
                    Prediction {
                        mean: m.objectives[j],
                        std: m.stds[j],
                    },
                );
            }
            c
        })
        .collect();
    let mut batch = CandidateBatch::new(Strategy::ParetoExploration, candidates)?;
    batch.notes = notes;
    Ok(batch)
}

// ---------------------------------------------------------------------------
// Boundary midpoints

#[derive(Debug, Clone, PartialEq)]
pub struct Midpoint {
    pub point: Vec<f64>,
    /// Index into the negatives.
    pub negative: usize,
    /// Index of the nearest positive.
    pub positive: usize,
    pub probability: f64,
    pub score: f64,
}

/// Pairs every negative with its nearest positive in scaled space, scores the
/// midpoints by `|p - 0.5|` and keeps the `k` best after deduplication.
/// `adjust` may move a midpoint (for constraint repair) or drop it.
pub fn rank_midpoints<P, A>(
    negatives: &[Vec<f64>],
    positives: &[Vec<f64>],
    scaler: &FeatureScaler,
    probability: P,
    mut adjust: A,
    k: usize,
) -> Result<Vec<Midpoint>>
where
    P: Fn(&[Vec<f64>]) -> Result<Vec<f64>>,
    A: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    if negatives.is_empty() || positives.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    let neg_s = scaler.transform(negatives)?;
    let pos_s = scaler.transform(positives)?;
    let mut mids = Vec::new();
    for (i, a) in neg_s.iter().enumerate() {
        let (j, _) = pos_s
            .iter()
            .enumerate()
            .map(|(j, b)| (j, a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()))
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
            .unwrap();
        let raw: Vec<f64> = negatives[i].iter().zip(&positives[j]).map(|(x, y)| 0.5 * (x + y)).collect();
        if let Some(p) = adjust(&raw) {
            mids.push((i, j, p));
        }
    }
    if mids.is_empty() {
        return Ok(Vec::new());
    }
    let pts: Vec<Vec<f64>> = mids.iter().map(|m| m.2.clone()).collect();
    let probs = probability(&pts)?;
    let mut scored: Vec<Midpoint> = mids
        .into_iter()
        .zip(probs)
        .map(|((negative, positive, point), probability)| Midpoint {
            point,
            negative,
            positive,
            probability,
            score: (probability - 0.5).abs(),
        })
        .collect();
    scored.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.negative.cmp(&b.negative)));

    let mut kept: Vec<Midpoint> = Vec::new();
    let mut kept_scaled: Vec<Vec<f64>> = Vec::new();
    for m in scored {
        if kept.len() == k {
            break;
        }
        let s = scaler.transform_row(&m.point)?;
        let dup = kept_scaled
            .iter()
            .any(|o| o.iter().zip(&s).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() < DEDUP_DISTANCE);
        if !dup {
            kept_scaled.push(s);
            kept.push(m);
        }
    }
    Ok(kept)
}

/// Record-level midpoint exploitation: labels come from the stored grade
/// label or, failing that, from `grade`; pairing uses standard-scaled control
/// and feed coordinates; midpoints are repaired into `spec` and rejected when
/// repair moves any coordinate by more than 10% of its range.
pub fn boundary_midpoints(
    records: &[ExperimentRecord],
    clf: &GpClassifier,
    clf_features: &[Feature],
    spec: &SurrogateSpaceSpec,
    grade: &GradeSpec,
    k: usize,
) -> Result<CandidateBatch> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let usable: Vec<&ExperimentRecord> = records.iter().filter(|r| !r.excluded).collect();
    let coords = |r: &ExperimentRecord| -> Vec<f64> {
        ConditionPoint {
            controls: r.controls,
            initial: r.initial,
            provenance: Provenance::Manual,
            seed_origin: None,
        }
        .coords()
        .to_vec()
    };
    let mut negatives = Vec::new();
    let mut positives = Vec::new();
    for r in &usable {
        let label = r.battery_grade.unwrap_or_else(|| label_grade(&r.product, grade));
        if label {
            positives.push(coords(r));
        } else {
            negatives.push(coords(r));
        }
    }
    if negatives.is_empty() || positives.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    let all: Vec<Vec<f64>> = negatives.iter().chain(&positives).cloned().collect();
    let scaler = crate::surrogate::gp::lenient_scaler(&all);
    let bounds = spec.bounds();
    let adjust = |raw: &[f64]| -> Option<Vec<f64>> {
        let c = to_coords(raw);
        let fixed = spec.repair(&c);
        let moved_too_far = (0..N_DIMS).any(|d| (fixed[d] - c[d]).abs() > MAX_REPAIR_FRACTION * (bounds[d].1 - bounds[d].0));
        (!moved_too_far && spec.contains(&fixed)).then(|| fixed.to_vec())
    };
    let prob = |pts: &[Vec<f64>]| -> Result<Vec<f64>> {
        let x: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| ConditionPoint::from_coords(&to_coords(p), Provenance::Midpoint).feature_vector(clf_features))
            .collect();
        clf.predict_proba(&x)
    };
    let mids = rank_midpoints(&negatives, &positives, &scaler, prob, adjust, k)?;
    if mids.is_empty() {
        return Err(Error::Constraint(
            "every boundary midpoint fell outside the active surrogate space".into(),
        ));
    }
    let candidates = mids
        .into_iter()
        .enumerate()
        .map(|(id, m)| {
            let point = ConditionPoint::from_coords(&to_coords(&m.point), Provenance::Midpoint);
            let mut c = Candidate::new(id, point, m.score);
            c.probability = Some(m.probability);
            c
        })
        .collect();
    CandidateBatch::new(Strategy::BoundaryMidpoint, candidates)
}

// ---------------------------------------------------------------------------
// UCB

pub fn ucb_from_predictions(predictions: &[Prediction], kappa: f64) -> Result<Vec<f64>> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::Invalid(format!("kappa must be non-negative, got {kappa}")));
    }
    Ok(predictions.iter().map(|p| p.mean + kappa * p.std).collect())
}

/// `mean + kappa * std` per point.
pub fn ucb_scores<M: UncertainModel + ?Sized>(model: &M, points: &[Vec<f64>], kappa: f64) -> Result<Vec<f64>> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::Invalid(format!("kappa must be non-negative, got {kappa}")));
    }
    ucb_from_predictions(&model.predict(points)?, kappa)
}

impl UncertainModel for GpClassifier {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    /// Clamped probability with the inner regressor's std.
    fn predict(&self, points: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        Ok(self
            .inner
            .predict(points)?
            .into_iter()
            .map(|p| Prediction {
                mean: p.mean.clamp(0.0, 1.0),
                std: p.std,
            })
            .collect())
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn farthest_point_extremes_first() {
        let objs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 9.0 - i as f64]).collect();
        assert_eq!(farthest_point_subset(&objs, 2), vec![0, 9]);
        assert_eq!(farthest_point_subset(&objs, 3), vec![0, 4, 9]);
        assert_eq!(farthest_point_subset(&objs, 10), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn one_dimensional_midpoint() {
        let m = rank_midpoints(
            &[vec![0.0]],
            &[vec![2.0]],
            &FeatureScaler::identity(1),
            |p| Ok(vec![0.5; p.len()]),
            |p| Some(p.to_vec()),
            5,
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].point, vec![1.0]);
    }

    #[test]
    fn midpoint_ranking_by_distance_to_half() {
        let prob = |pts: &[Vec<f64>]| Ok(pts.iter().map(|p| if p[0] == 1.0 { 0.48 } else { 0.9 }).collect());
        let all = rank_midpoints(
            &[vec![0.0], vec![10.0]],
            &[vec![2.0]],
            &FeatureScaler::identity(1),
            prob,
            |p| Some(p.to_vec()),
            5,
        )
        .unwrap();
        let pts: Vec<f64> = all.iter().map(|m| m.point[0]).collect();
        assert_eq!(pts, vec![1.0, 6.0]);
        assert!(all.windows(2).all(|w| w[0].score <= w[1].score));
        let one = rank_midpoints(
            &[vec![0.0], vec![10.0]],
            &[vec![2.0]],
            &FeatureScaler::identity(1),
            prob,
            |p| Some(p.to_vec()),
            1,
        )
        .unwrap();
        assert_eq!(one[0].point, vec![1.0]);
    }

    #[test]
    fn duplicate_midpoints_collapse() {
        let m = rank_midpoints(
            &[vec![0.0], vec![0.0]],
            &[vec![2.0]],
            &FeatureScaler::identity(1),
            |p| Ok(vec![0.4; p.len()]),
            |p| Some(p.to_vec()),
            5,
        )
        .unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn ucb_arithmetic() {
        let p = [Prediction { mean: 1.0, std: 0.5 }];
        assert_eq!(ucb_from_predictions(&p, 2.0).unwrap(), vec![2.0]);
        assert!(ucb_from_predictions(&p, -1.0).is_err());
    }

    #[test]
    fn batch_rejects_bad_scores() {
        let pt = ConditionPoint::from_coords(&[10.0, 50.0, 2.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0], Provenance::Manual);
        assert!(CandidateBatch::new(Strategy::Manual, vec![]).is_err());
        assert!(CandidateBatch::new(Strategy::Manual, vec![Candidate::new(0, pt.clone(), f64::NAN)]).is_err());
        assert!(CandidateBatch::new(Strategy::Manual, vec![Candidate::new(0, pt, 1.0)]).is_ok());
    }
}
