//! Commands on a campaign. Every command validates first and then commits a
//! single event, so a failed command leaves the state untouched.

use std::path::Path;

use rayon::prelude::*;

use super::persist::Store;
use super::report::{model_quality, physicality_flags, AnalysisSource, IterationReport};
use super::state::{
    CampaignConfig, CampaignState, CandidateRef, ClassifierSnapshot, Event, IterationRecord, ModelSnapshot, Phase,
};
use crate::acquisition::{
    boundary_midpoints, farthest_point_subset, non_dominated_sort, nsga2_pareto, pareto_candidates, ucb_scores,
    Candidate, CandidateBatch, ModelObjective, ObjectiveFn, ParetoFront, ReviewStatus, Strategy,
};
use crate::analysis::{analyze, AnalysisReport};
use crate::dataset::{feature_matrix, ExperimentRecord, Feature, FeatureSource, Target};
use crate::error::{Error, Result};
use crate::sampling::{lhc_sample, random_walk, ConditionPoint, Provenance, SurrogateSpaceSpec, WalkConfig};
use crate::seeds::derive_seed;
use crate::surrogate::{GpClassifier, GpModel, Prediction};

// Seed streams of one iteration.
const STREAM_MODELS: u64 = 0;
const STREAM_CLASSIFIER: u64 = 10;
const STREAM_ACQUISITION: u64 = 20;
const STREAM_ANALYSIS: u64 = 30;
const STREAM_FLAGS: u64 = 40;

/// A campaign, optionally backed by a directory on disk.
#[derive(Debug)]
pub struct Campaign {
    state: CampaignState,
    store: Option<Store>,
}

/// Probability grid over two classifier features, the others held at the
/// record medians.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundaryPlane {
    pub iteration: usize,
    pub x: Feature,
    pub y: Feature,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// `probability[j][i]` is at `(x_values[i], y_values[j])`.
    pub probability: Vec<Vec<f64>>,
    pub fixed: Vec<(Feature, f64)>,
}

impl Campaign {
    /// In-memory campaign.
    pub fn new(config: CampaignConfig, spaces: Vec<SurrogateSpaceSpec>, active_space: &str) -> Result<Self> {
        let mut c = Campaign {
            state: CampaignState::default(),
            store: None,
        };
        c.commit(created_event(config, spaces, active_space)?)?;
        Ok(c)
    }

    /// New campaign persisted under `dir`; refuses to overwrite an existing one.
    pub fn create(
        dir: impl AsRef<Path>,
        config: CampaignConfig,
        spaces: Vec<SurrogateSpaceSpec>,
        active_space: &str,
    ) -> Result<Self> {
        let store = Store::create(dir)?;
        if store.exists() {
            return Err(Error::InvalidState(format!("a campaign already exists in {}", store.dir().display())));
        }
        let mut c = Campaign {
            state: CampaignState::default(),
            store: Some(store),
        };
        c.commit(created_event(config, spaces, active_space)?)?;
        Ok(c)
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let store = Store::create(dir)?;
        let state = store.load()?;
        Ok(Campaign {
            state,
            store: Some(store),
        })
    }

    pub fn from_state(state: CampaignState) -> Self {
        Campaign { state, store: None }
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.state.config
    }

    pub fn into_state(self) -> CampaignState {
        self.state
    }

    fn commit(&mut self, event: Event) -> Result<()> {
        let mut next = self.state.clone();
        next.apply(event);
        if let Some(store) = &self.store {
            let logged = next.events.last().expect("event just applied");
            store.append(logged)?;
            store.write_state(&next)?;
        }
        self.state = next;
        Ok(())
    }

    // -----------------------------------------------------------------------
    // Records

    fn check_record(&self, record: &ExperimentRecord, pending: &[u32]) -> Result<ExperimentRecord> {
        record.validate()?;
        if self.state.records.iter().any(|r| r.exp_id == record.exp_id) || pending.contains(&record.exp_id) {
            return Err(Error::Integrity(format!("duplicate exp_id {}", record.exp_id)));
        }
        let mut r = record.clone();
        if let Some(w) = r.purity_warning() {
            if !r.warnings.contains(&w) {
                r.warnings.push(w);
            }
        }
        Ok(r)
    }

    pub fn import_records(&mut self, records: &[ExperimentRecord]) -> Result<()> {
        let mut checked = Vec::with_capacity(records.len());
        let mut ids = Vec::with_capacity(records.len());
        for r in records {
            checked.push(self.check_record(r, &ids)?);
            ids.push(r.exp_id);
        }
        self.commit(Event::RecordsImported { records: checked })
    }

    /// Adds one measured result, linked to the candidate it executed when given.
    pub fn ingest(&mut self, record: &ExperimentRecord, candidate: Option<CandidateRef>) -> Result<()> {
        let r = self.check_record(record, &[])?;
        if let Some(c) = candidate {
            let cand = self.state.candidate(c)?;
            if !matches!(cand.review_status, ReviewStatus::Approved | ReviewStatus::Edited) {
                return Err(Error::InvalidState(format!(
                    "candidate {} of batch {} is {:?}, not approved",
                    c.candidate_id, c.batch_id, cand.review_status
                )));
            }
            if let Some(id) = cand.result_exp_id {
                return Err(Error::InvalidState(format!("candidate already has result exp {id}")));
            }
            if self.state.abandoned.iter().any(|a| a.candidate == c) {
                return Err(Error::InvalidState("candidate was abandoned".into()));
            }
        }
        self.commit(Event::RecordIngested {
            record: Box::new(r),
            candidate,
        })
    }

    // -----------------------------------------------------------------------
    // Spaces and phase

    /// Adds or replaces a surrogate space by label.
    pub fn save_space(&mut self, spec: SurrogateSpaceSpec, activate: bool) -> Result<()> {
        spec.validate()?;
        self.commit(Event::SpaceSaved { spec, activate })
    }

    pub fn activate_space(&mut self, label: &str) -> Result<()> {
        self.state.space(label)?;
        self.commit(Event::SpaceActivated { label: label.to_string() })
    }

    /// Replaces the active space's definition in place.
    pub fn set_active_space(&mut self, mut spec: SurrogateSpaceSpec) -> Result<()> {
        spec.label = self.state.active_space.clone();
        self.save_space(spec, true)
    }

    pub fn set_phase(&mut self, phase: Phase) -> Result<()> {
        if phase == Phase::Exploitation && !self.state.has_both_classes() {
            return Err(Error::DegenerateLabels.context("switching to exploitation"));
        }
        self.commit(Event::PhaseChanged { phase })
    }

    // -----------------------------------------------------------------------
    // Review

    pub fn review(
        &mut self,
        candidate: CandidateRef,
        decision: ReviewStatus,
        edited_point: Option<ConditionPoint>,
    ) -> Result<()> {
        let cand = self.state.candidate(candidate)?;
        if cand.review_status != ReviewStatus::Proposed {
            return Err(Error::InvalidState(format!(
                "candidate {} of batch {} was already reviewed ({:?})",
                candidate.candidate_id, candidate.batch_id, cand.review_status
            )));
        }
        match (decision, &edited_point) {
            (ReviewStatus::Proposed, _) => return Err(Error::Invalid("a review must decide".into())),
            (ReviewStatus::Edited, None) => return Err(Error::Invalid("an edit needs a replacement point".into())),
            (ReviewStatus::Edited, Some(p)) => {
                let spec = self.state.active_spec()?;
                p.controls.validate()?;
                p.initial.validate()?;
                if !spec.satisfies_constraints(&p.coords()) {
                    return Err(Error::Constraint(format!(
                        "edited point violates space {}: needs t_hot >= t_cold + {} and element sum <= {}",
                        spec.label, spec.min_delta_t, spec.max_element_sum
                    )));
                }
            }
            (_, Some(_)) => return Err(Error::Invalid("only edits carry a replacement point".into())),
            _ => {}
        }
        self.commit(Event::CandidateReviewed {
            candidate,
            decision,
            edited_point,
        })
    }

    /// Closes an approved candidate that will never be run.
    pub fn abandon(&mut self, candidate: CandidateRef, reason: &str) -> Result<()> {
        if !self.state.open_candidates().contains(&candidate) {
            return Err(Error::InvalidState(format!(
                "candidate {} of batch {} is not awaiting a result",
                candidate.candidate_id, candidate.batch_id
            )));
        }
        self.commit(Event::CandidateAbandoned {
            candidate,
            reason: reason.to_string(),
        })
    }

    /// Queues an expert-chosen condition as a one-candidate manual batch.
    pub fn queue_manual(&mut self, mut point: ConditionPoint) -> Result<CandidateRef> {
        point.controls.validate()?;
        point.initial.validate()?;
        let spec = self.state.active_spec()?;
        if !spec.satisfies_constraints(&point.coords()) {
            return Err(Error::Constraint(format!("manual point violates the constraints of space {}", spec.label)));
        }
        point.provenance = Provenance::Manual;
        let mut batch = CandidateBatch::new(Strategy::Manual, vec![Candidate::new(0, point, 0.0)])?;
        batch.id = self.state.next_batch_id();
        batch.iteration = self.state.iteration;
        if let Some(rec) = self.state.latest_iteration() {
            for m in &rec.models {
                batch.annotate(m.target.name(), &m.model, &m.features)?;
            }
            if let Some(c) = &rec.classifier {
                batch.annotate_probability(&c.model, &c.features)?;
            }
        }
        let r = CandidateRef {
            batch_id: batch.id,
            candidate_id: 0,
        };
        self.commit(Event::ManualCandidateQueued { batch: Box::new(batch) })?;
        Ok(r)
    }

    // -----------------------------------------------------------------------
    // Iterations

    /// Trains the surrogates, generates a batch with `strategy` and records
    /// the iteration. The iteration counter moves only once the batch is stored.
    pub fn run_iteration(&mut self, strategy: Strategy, seed: u64) -> Result<(CandidateBatch, IterationReport)> {
        let record = plan_iteration(&self.state, strategy, seed)?;
        let (batch, record) = record;
        let report = record.report.clone();
        self.commit(Event::IterationCompleted {
            batch: Box::new(batch.clone()),
            record: Box::new(record),
        })?;
        Ok((batch, report))
    }

    /// Predictions of a stored per-target model.
    pub fn predict(&self, iteration: usize, target: Target, points: &[ConditionPoint]) -> Result<Vec<Prediction>> {
        let rec = self.state.iteration_record(iteration)?;
        let snap = rec
            .model(target)
            .ok_or_else(|| Error::NotFound(format!("model for {} in iteration {iteration}", target.name())))?;
        let x: Vec<Vec<f64>> = points.iter().map(|p| p.feature_vector(&snap.features)).collect();
        snap.model.predict(&x)
    }

    /// Classifier probability on a `grid x grid` lattice spanning the active
    /// space along `x` and `y`. Uses the latest iteration's classifier, or
    /// fits one on the current records when none is stored.
    pub fn boundary_plane(&self, x: Feature, y: Feature, grid: usize, seed: u64) -> Result<BoundaryPlane> {
        if !(2..=512).contains(&grid) {
            return Err(Error::Invalid(format!("grid must be in [2, 512], got {grid}")));
        }
        if x == y {
            return Err(Error::Invalid("x and y must differ".into()));
        }
        let stored = self.state.iterations.iter().rev().find_map(|r| r.classifier.as_ref());
        let fitted;
        let clf = match stored {
            Some(c) => c,
            None => {
                fitted = fit_classifier(&self.state, derive_seed(seed, STREAM_CLASSIFIER))?;
                &fitted
            }
        };
        let records = self.state.training_records();
        let spec = self.state.active_spec()?;
        let span = |f: Feature| -> Result<(f64, f64)> {
            let dim = crate::sampling::Dim::ALL
                .into_iter()
                .find(|d| d.feature() == f)
                .map(|d| spec.range(d));
            match dim {
                Some(r) => Ok((r.min, r.max)),
                None => {
                    let v: Vec<f64> = records.iter().map(|r| r.feature(f)).collect();
                    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if lo < hi {
                        Ok((lo, hi))
                    } else {
                        Err(Error::DegenerateFeature { column: f.name().into() })
                    }
                }
            }
        };
        let lin = |(lo, hi): (f64, f64)| -> Vec<f64> {
            (0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect()
        };
        let x_values = lin(span(x)?);
        let y_values = lin(span(y)?);
        let fixed: Vec<(Feature, f64)> = clf
            .features
            .iter()
            .filter(|f| **f != x && **f != y)
            .map(|&f| {
                let mut v: Vec<f64> = records.iter().map(|r| r.feature(f)).collect();
                v.sort_by(f64::total_cmp);
                (f, median(&v))
            })
            .collect();
        let (xi, yi) = match (
            clf.features.iter().position(|f| *f == x),
            clf.features.iter().position(|f| *f == y),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Invalid(format!(
                    "classifier features are {:?}; both axes must be among them",
                    clf.features.iter().map(|f| f.name()).collect::<Vec<_>>()
                )))
            }
        };
        let mut rows = Vec::with_capacity(grid * grid);
        for &yv in &y_values {
            for &xv in &x_values {
                let mut row: Vec<f64> = clf
                    .features
                    .iter()
                    .map(|f| fixed.iter().find(|(g, _)| g == f).map(|(_, v)| *v).unwrap_or(0.0))
                    .collect();
                row[xi] = xv;
                row[yi] = yv;
                rows.push(row);
            }
        }
        let p = clf.model.predict_proba(&rows)?;
        Ok(BoundaryPlane {
            iteration: self.state.iteration,
            x,
            y,
            x_values,
            y_values,
            probability: p.chunks(grid).map(|c| c.to_vec()).collect(),
            fixed,
        })
    }
}

fn created_event(config: CampaignConfig, spaces: Vec<SurrogateSpaceSpec>, active_space: &str) -> Result<Event> {
    config.validate()?;
    for s in &spaces {
        s.validate()?;
    }
    for (i, s) in spaces.iter().enumerate() {
        if spaces[..i].iter().any(|t| t.label == s.label) {
            return Err(Error::Invalid(format!("duplicate space label `{}`", s.label)));
        }
    }
    if !spaces.iter().any(|s| s.label == active_space) {
        return Err(Error::NotFound(format!("surrogate space `{active_space}`")));
    }
    Ok(Event::Created {
        config: Box::new(config),
        spaces,
        active_space: active_space.to_string(),
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn fit_regressors(state: &CampaignState, seed: u64) -> Result<Vec<ModelSnapshot>> {
    let records = state.training_records();
    let features = &state.config.features;
    let x: Vec<Vec<f64>> = records.iter().map(|r| r.feature_vector(features)).collect();
    let ids: Vec<u32> = records.iter().map(|r| r.exp_id).collect();
    Target::ELEMENTS
        .par_iter()
        .enumerate()
        .map(|(k, &target)| {
            let y: Vec<f64> = records.iter().map(|r| target.value(r)).collect();
            let model = GpModel::fit(&x, &y, &state.config.gp, derive_seed(seed, STREAM_MODELS + k as u64))
                .map_err(|e| e.context(format!("fitting GP for {}", target.name())))?;
            Ok(ModelSnapshot {
                target,
                features: features.clone(),
                model,
                training_exp_ids: ids.clone(),
            })
        })
        .collect()
}

fn fit_classifier(state: &CampaignState, seed: u64) -> Result<ClassifierSnapshot> {
    let records = state.training_records();
    let features = &state.config.classifier_features;
    let x: Vec<Vec<f64>> = records.iter().map(|r| r.feature_vector(features)).collect();
    let labels = state.training_labels();
    let model = GpClassifier::fit(&x, &labels, &state.config.classifier_config(), seed)
        .map_err(|e| e.context("fitting grade classifier"))?;
    Ok(ClassifierSnapshot {
        features: features.clone(),
        model,
        training_exp_ids: records.iter().map(|r| r.exp_id).collect(),
    })
}

fn find_model(models: &[ModelSnapshot], target: Target) -> &ModelSnapshot {
    models.iter().find(|m| m.target == target).expect("every element target is modelled")
}

struct Generated {
    batch: CandidateBatch,
    pareto_front: Option<ParetoFront>,
    walk_anchors: Vec<ConditionPoint>,
    /// Points and predicted targets for surrogate-based analysis.
    surrogate_sample: Option<Vec<ConditionPoint>>,
}

fn generate(
    state: &CampaignState,
    strategy: Strategy,
    spec: &SurrogateSpaceSpec,
    models: &[ModelSnapshot],
    classifier: Option<&ClassifierSnapshot>,
    seed: u64,
) -> Result<Generated> {
    let cfg = &state.config;
    let mg = find_model(models, Target::FinalMg);
    let ca = find_model(models, Target::FinalCa);
    let need_classifier = || {
        classifier.ok_or_else(|| {
            Error::InvalidState(format!("strategy {} needs the exploitation phase", strategy.name()))
        })
    };
    match strategy {
        Strategy::ParetoExploration => {
            let o_mg = ModelObjective {
                name: Target::FinalMg.name().into(),
                model: &mg.model,
                features: mg.features.clone(),
            };
            let o_ca = ModelObjective {
                name: Target::FinalCa.name().into(),
                model: &ca.model,
                features: ca.features.clone(),
            };
            let objectives: [&dyn ObjectiveFn; 2] = [&o_mg, &o_ca];
            let front = nsga2_pareto(spec, &objectives, &cfg.nsga2, seed)?;
            let batch = pareto_candidates(&front, cfg.pareto_k)?;
            Ok(Generated {
                batch,
                pareto_front: Some(front),
                walk_anchors: Vec::new(),
                surrogate_sample: None,
            })
        }
        Strategy::RandomWalkVerification => {
            let front = state
                .iterations
                .iter()
                .rev()
                .find_map(|r| r.pareto_front.as_ref())
                .ok_or_else(|| Error::InvalidState("random-walk verification needs an earlier Pareto front".into()))?;
            let anchors: Vec<ConditionPoint> = front
                .members
                .iter()
                .filter(|m| spec.within_bounds(&m.point.coords()))
                .map(|m| m.point.clone())
                .collect();
            if anchors.is_empty() {
                return Err(Error::InvalidState(format!(
                    "no Pareto member of the last front lies inside space {}",
                    spec.label
                )));
            }
            let walk_cfg = WalkConfig {
                n_walkers: cfg.walk.n_walkers,
                steps_per_walker: cfg.walk.steps_per_walker,
                step_fraction: cfg.walk.step_fraction,
                n_output: cfg.walk.n_output,
                anchor_points: anchors.clone(),
            };
            let points = random_walk(&walk_cfg, spec, seed)?;
            let xm: Vec<Vec<f64>> = feature_matrix(&points, &mg.features);
            let xc: Vec<Vec<f64>> = feature_matrix(&points, &ca.features);
            let pm = mg.model.predict(&xm)?;
            let pc = ca.model.predict(&xc)?;
            let objs: Vec<Vec<f64>> = pm.iter().zip(&pc).map(|(a, b)| vec![a.mean, b.mean]).collect();
            let front_idx = non_dominated_sort(&objs).swap_remove(0);
            let front_objs: Vec<Vec<f64>> = front_idx.iter().map(|&i| objs[i].clone()).collect();
            let chosen = farthest_point_subset(&front_objs, cfg.walk_k);
            let mut notes = Vec::new();
            if cfg.walk_k > front_idx.len() {
                notes.push(format!(
                    "requested {} candidates but only {} walk points are non-dominated",
                    cfg.walk_k,
                    front_idx.len()
                ));
            }
            let candidates = chosen
                .iter()
                .enumerate()
                .map(|(id, &j)| {
                    let i = front_idx[j];
                    Candidate::new(id, points[i].clone(), objs[i][0] + objs[i][1])
                })
                .collect();
            let mut batch = CandidateBatch::new(Strategy::RandomWalkVerification, candidates)?;
            batch.notes = notes;
            Ok(Generated {
                batch,
                pareto_front: None,
                walk_anchors: anchors,
                surrogate_sample: Some(points),
            })
        }
        Strategy::BoundaryMidpoint => {
            let clf = need_classifier()?;
            let records: Vec<ExperimentRecord> = state.training_records().into_iter().cloned().collect();
            let batch = boundary_midpoints(&records, &clf.model, &clf.features, spec, &cfg.grade, cfg.midpoint_k)?;
            Ok(Generated {
                batch,
                pareto_front: None,
                walk_anchors: Vec::new(),
                surrogate_sample: None,
            })
        }
        Strategy::Ucb => {
            let clf = need_classifier()?;
            let pool = lhc_sample(spec, seed)?;
            let x = feature_matrix(&pool, &clf.features);
            let scores = ucb_scores(&clf.model, &x, cfg.kappa)?;
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            order.truncate(cfg.ucb_k);
            let candidates = order
                .iter()
                .enumerate()
                .map(|(id, &i)| Candidate::new(id, pool[i].clone(), scores[i]))
                .collect();
            Ok(Generated {
                batch: CandidateBatch::new(Strategy::Ucb, candidates)?,
                pareto_front: None,
                walk_anchors: Vec::new(),
                surrogate_sample: None,
            })
        }
        Strategy::Manual => Err(Error::Invalid(
            "manual candidates are queued by experts, not generated".into(),
        )),
    }
}

/// Evenly spaced subsample of at most `k` items, keeping order.
fn thin<T: Clone>(items: &[T], k: usize) -> Vec<T> {
    if items.len() <= k {
        return items.to_vec();
    }
    (0..k).map(|i| items[i * items.len() / k].clone()).collect()
}

fn run_analysis(
    state: &CampaignState,
    models: &[ModelSnapshot],
    sample: Option<&[ConditionPoint]>,
    seed: u64,
) -> Result<(AnalysisSource, Vec<AnalysisReport>)> {
    let cfg = &state.config;
    let names: Vec<&str> = cfg.features.iter().map(|f| f.name()).collect();
    let mut out = Vec::new();
    let source = if sample.is_some() {
        AnalysisSource::Surrogate
    } else {
        AnalysisSource::Records
    };
    let records = state.training_records();
    let inputs: Vec<Vec<f64>> = match sample {
        Some(points) => feature_matrix(&thin(points, cfg.analysis_max_rows), &cfg.features),
        None => records.iter().map(|r| r.feature_vector(&cfg.features)).collect(),
    };
    // sensitivity probes: LHC points of the active space, or surrogate points
    let probes = match sample {
        Some(_) => thin(&inputs, cfg.n_probes),
        None if cfg.n_probes == 0 => Vec::new(),
        None => {
            let mut spec = state.active_spec()?.clone();
            spec.n_points = cfg.n_probes;
            feature_matrix(&lhc_sample(&spec, derive_seed(seed, 99))?, &cfg.features)
        }
    };
    for (k, &target) in cfg.analysis_targets.iter().enumerate() {
        let targets: Vec<f64> = match sample {
            Some(_) => {
                let m = models
                    .iter()
                    .find(|m| m.target == target)
                    .ok_or_else(|| Error::NotFound(format!("model for {}", target.name())))?;
                let x: Vec<Vec<f64>> = if m.features == cfg.features {
                    inputs.clone()
                } else {
                    let pts = thin(sample.unwrap_or_default(), cfg.analysis_max_rows);
                    feature_matrix(&pts, &m.features)
                };
                m.model.predict_mean(&x)?
            }
            None => records.iter().map(|r| target.value(r)).collect(),
        };
        let report = analyze(
            &inputs,
            &names,
            target.name(),
            &targets,
            &probes,
            &cfg.analysis,
            derive_seed(seed, k as u64),
        )
        .map_err(|e| e.context(format!("analysing {}", target.name())))?;
        out.push(report);
    }
    Ok((source, out))
}

/// The pure part of an iteration: everything it would commit, computed from
/// the current state and seed only.
pub fn plan_iteration(
    state: &CampaignState,
    strategy: Strategy,
    seed: u64,
) -> Result<(CandidateBatch, IterationRecord)> {
    let n = state.training_records().len();
    if n < state.config.min_records {
        return Err(Error::InsufficientData {
            needed: state.config.min_records,
            got: n,
        });
    }
    if state.phase == Phase::Exploitation && !state.has_both_classes() {
        return Err(Error::DegenerateLabels.context("exploitation iteration"));
    }
    let spec = state.active_spec()?.clone();
    let models = fit_regressors(state, seed)?;
    let classifier = match state.phase {
        Phase::Exploitation => Some(fit_classifier(state, derive_seed(seed, STREAM_CLASSIFIER))?),
        Phase::Exploration => None,
    };
    let generated = generate(
        state,
        strategy,
        &spec,
        &models,
        classifier.as_ref(),
        derive_seed(seed, STREAM_ACQUISITION),
    )?;
    let mut batch = generated.batch;
    for m in &models {
        batch.annotate(m.target.name(), &m.model, &m.features)?;
    }
    if let Some(c) = &classifier {
        batch.annotate_probability(&c.model, &c.features)?;
    }
    let iteration = state.iteration + 1;
    batch.id = state.next_batch_id();
    batch.iteration = iteration;

    let (analysis_source, analysis) = run_analysis(
        state,
        &models,
        generated.surrogate_sample.as_deref(),
        derive_seed(seed, STREAM_ANALYSIS),
    )?;
    let (negative_predictions, flags) = physicality_flags(&models, &spec, derive_seed(seed, STREAM_FLAGS))?;
    let report = IterationReport {
        iteration,
        strategy,
        seed,
        phase: state.phase,
        space_label: spec.label.clone(),
        n_training: n,
        model_quality: models.iter().map(model_quality).collect(),
        analysis_source,
        analysis,
        negative_predictions,
        flags,
    };
    let record = IterationRecord {
        iteration,
        strategy,
        seed,
        phase: state.phase,
        space: spec,
        batch_id: batch.id,
        models,
        classifier,
        pareto_front: generated.pareto_front,
        walk_anchors: generated.walk_anchors,
        report,
    };
    Ok((batch, record))
}

/// Recomputes an iteration's physicality flags from its stored snapshot.
pub fn recompute_flags(record: &IterationRecord) -> Result<(std::collections::BTreeMap<String, usize>, Vec<String>)> {
    physicality_flags(&record.models, &record.space, derive_seed(record.seed, STREAM_FLAGS))
}
