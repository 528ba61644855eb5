//! Campaign state as a fold over an append-only event log.

use serde::{Deserialize, Serialize};

use super::report::IterationReport;
use crate::acquisition::{CandidateBatch, Nsga2Config, ParetoFront, ReviewStatus, Strategy, DEFAULT_KAPPA};
use crate::analysis::AnalysisConfig;
use crate::dataset::{label_grade, ExperimentRecord, Feature, GradeSpec, Target};
use crate::error::{Error, Result};
use crate::sampling::{ConditionPoint, SurrogateSpaceSpec};
use crate::surrogate::{GpClassifier, GpConfig, GpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Exploration,
    Exploitation,
}

/// Random-walk verification settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub n_walkers: usize,
    pub steps_per_walker: usize,
    pub step_fraction: f64,
    pub n_output: usize,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            n_walkers: 20_000,
            steps_per_walker: 1,
            step_fraction: 0.25,
            n_output: 5_000,
        }
    }
}

/// Tunable campaign settings, loadable from the CLI's `--config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub grade: GradeSpec,
    /// Regressor inputs.
    pub features: Vec<Feature>,
    /// Classifier inputs (the probability plane shown to experts).
    pub classifier_features: Vec<Feature>,
    pub gp: GpConfig,
    pub classifier_alpha: f64,
    pub classifier_length_scale: f64,
    pub nsga2: Nsga2Config,
    pub kappa: f64,
    pub pareto_k: usize,
    pub walk_k: usize,
    pub midpoint_k: usize,
    pub ucb_k: usize,
    pub walk: WalkParams,
    pub analysis: AnalysisConfig,
    pub analysis_targets: Vec<Target>,
    /// Rows fed to the analysis backend when analysing surrogate predictions.
    pub analysis_max_rows: usize,
    /// LHC probes added to the column means for sensitivity evaluation.
    pub n_probes: usize,
    pub min_records: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            grade: GradeSpec::default(),
            features: Feature::ALL.to_vec(),
            classifier_features: vec![Feature::InitMg, Feature::TCold],
            gp: GpConfig::default(),
            classifier_alpha: crate::surrogate::classifier::CLASSIFIER_ALPHA,
            classifier_length_scale: crate::surrogate::classifier::CLASSIFIER_LENGTH_SCALE,
            nsga2: Nsga2Config::default(),
            kappa: DEFAULT_KAPPA,
            pareto_k: 30,
            walk_k: 30,
            midpoint_k: 10,
            ucb_k: 10,
            walk: WalkParams::default(),
            analysis: AnalysisConfig::default(),
            analysis_targets: vec![Target::FinalMg, Target::FinalCa],
            analysis_max_rows: 1_000,
            n_probes: 32,
            min_records: 4,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.grade.validate()?;
        self.gp.kernel.validate()?;
        self.nsga2.validate()?;
        if self.features.is_empty() || self.classifier_features.is_empty() {
            return Err(Error::Invalid("feature lists must not be empty".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Invalid("kappa must be non-negative".into()));
        }
        if !(self.classifier_alpha > 0.0 && self.classifier_length_scale > 0.0) {
            return Err(Error::Invalid("classifier alpha and length scale must be positive".into()));
        }
        if [self.pareto_k, self.walk_k, self.midpoint_k, self.ucb_k].contains(&0) {
            return Err(Error::Invalid("batch sizes must be at least 1".into()));
        }
        if self.min_records < 2 {
            return Err(Error::Invalid("min_records must be at least 2".into()));
        }
        Ok(())
    }

    pub fn classifier_config(&self) -> GpConfig {
        GpConfig::fixed(
            crate::surrogate::KernelSpec::rbf(vec![self.classifier_length_scale; self.classifier_features.len()]),
            self.classifier_alpha,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub target: Target,
    pub features: Vec<Feature>,
    pub model: GpModel,
    pub training_exp_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSnapshot {
    pub features: Vec<Feature>,
    pub model: GpClassifier,
    pub training_exp_ids: Vec<u32>,
}

/// Everything produced by one completed acquisition cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub phase: Phase,
    pub space: SurrogateSpaceSpec,
    pub batch_id: usize,
    pub models: Vec<ModelSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pareto_front: Option<ParetoFront>,
    /// Anchors of a random-walk iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub walk_anchors: Vec<ConditionPoint>,
    pub report: IterationReport,
}

impl IterationRecord {
    pub fn model(&self, target: Target) -> Option<&ModelSnapshot> {
        self.models.iter().find(|m| m.target == target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateRef {
    pub batch_id: usize,
    pub candidate_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Created {
        config: Box<CampaignConfig>,
        spaces: Vec<SurrogateSpaceSpec>,
        active_space: String,
    },
    RecordsImported {
        records: Vec<ExperimentRecord>,
    },
    RecordIngested {
        record: Box<ExperimentRecord>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        candidate: Option<CandidateRef>,
    },
    SpaceSaved {
        spec: SurrogateSpaceSpec,
        activate: bool,
    },
    SpaceActivated {
        label: String,
    },
    PhaseChanged {
        phase: Phase,
    },
    IterationCompleted {
        batch: Box<CandidateBatch>,
        record: Box<IterationRecord>,
    },
    CandidateReviewed {
        candidate: CandidateRef,
        decision: ReviewStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edited_point: Option<ConditionPoint>,
    },
    CandidateAbandoned {
        candidate: CandidateRef,
        reason: String,
    },
    ManualCandidateQueued {
        batch: Box<CandidateBatch>,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Created { .. } => "created",
            Event::RecordsImported { .. } => "records_imported",
            Event::RecordIngested { .. } => "record_ingested",
            Event::SpaceSaved { .. } => "space_saved",
            Event::SpaceActivated { .. } => "space_activated",
            Event::PhaseChanged { .. } => "phase_changed",
            Event::IterationCompleted { .. } => "iteration_completed",
            Event::CandidateReviewed { .. } => "candidate_reviewed",
            Event::CandidateAbandoned { .. } => "candidate_abandoned",
            Event::ManualCandidateQueued { .. } => "manual_candidate_queued",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abandonment {
    pub candidate: CandidateRef,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CampaignState {
    pub config: CampaignConfig,
    pub records: Vec<ExperimentRecord>,
    pub spaces: Vec<SurrogateSpaceSpec>,
    pub active_space: String,
    pub phase: Phase,
    /// Completed acquisition cycles.
    pub iteration: usize,
    pub batches: Vec<CandidateBatch>,
    pub iterations: Vec<IterationRecord>,
    pub abandoned: Vec<Abandonment>,
    pub events: Vec<LoggedEvent>,
}

impl CampaignState {
    /// Folds one event into the state. Events are assumed to have been
    /// validated by the command that produced them.
    pub fn apply(&mut self, event: Event) {
        match &event {
            Event::Created {
                config,
                spaces,
                active_space,
            } => {
                let events = std::mem::take(&mut self.events);
                *self = CampaignState {
                    config: (**config).clone(),
                    spaces: spaces.clone(),
                    active_space: active_space.clone(),
                    events,
                    ..CampaignState::default()
                };
            }
            Event::RecordsImported { records } => {
                for r in records {
                    self.records.push(self.labeled(r.clone()));
                }
            }
            Event::RecordIngested { record, candidate } => {
                let record = self.labeled((**record).clone());
                if let Some(c) = candidate {
                    if let Some(cand) = self.candidate_mut(*c) {
                        cand.result_exp_id = Some(record.exp_id);
                    }
                }
                self.records.push(record);
            }
            Event::SpaceSaved { spec, activate } => {
                match self.spaces.iter_mut().find(|s| s.label == spec.label) {
                    Some(s) => *s = spec.clone(),
                    None => self.spaces.push(spec.clone()),
                }
                if *activate {
                    self.active_space = spec.label.clone();
                }
            }
            Event::SpaceActivated { label } => self.active_space = label.clone(),
            Event::PhaseChanged { phase } => self.phase = *phase,
            Event::IterationCompleted { batch, record } => {
                self.batches.push((**batch).clone());
                self.iterations.push((**record).clone());
                self.iteration = record.iteration;
            }
            Event::CandidateReviewed {
                candidate,
                decision,
                edited_point,
            } => {
                if let Some(c) = self.candidate_mut(*candidate) {
                    c.review_status = *decision;
                    c.edited_point = edited_point.clone();
                }
            }
            Event::CandidateAbandoned { candidate, reason } => self.abandoned.push(Abandonment {
                candidate: *candidate,
                reason: reason.clone(),
            }),
            Event::ManualCandidateQueued { batch } => self.batches.push((**batch).clone()),
        }
        let seq = self.events.len() as u64 + 1;
        self.events.push(LoggedEvent { seq, event });
    }

    /// Rebuilds a state from its event log.
    pub fn replay(events: impl IntoIterator<Item = Event>) -> Result<Self> {
        let mut state = CampaignState::default();
        for (i, e) in events.into_iter().enumerate() {
            if i == 0 && !matches!(e, Event::Created { .. }) {
                return Err(Error::InvalidState("event log must start with a `created` event".into()));
            }
            state.apply(e);
        }
        if state.events.is_empty() {
            return Err(Error::InvalidState("event log is empty".into()));
        }
        Ok(state)
    }

    fn labeled(&self, mut record: ExperimentRecord) -> ExperimentRecord {
        if record.battery_grade.is_none() {
            record.battery_grade = Some(label_grade(&record.product, &self.config.grade));
        }
        record
    }

    pub fn active_spec(&self) -> Result<&SurrogateSpaceSpec> {
        self.space(&self.active_space)
    }

    pub fn space(&self, label: &str) -> Result<&SurrogateSpaceSpec> {
        self.spaces
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::NotFound(format!("surrogate space `{label}`")))
    }

    pub fn batch(&self, id: usize) -> Result<&CandidateBatch> {
        self.batches
            .iter()
            .find(|b| b.id == id)
            .ok_or_else(|| Error::NotFound(format!("batch {id}")))
    }

    pub fn candidate(&self, c: CandidateRef) -> Result<&crate::acquisition::Candidate> {
        self.batch(c.batch_id)?
            .get(c.candidate_id)
            .ok_or_else(|| Error::NotFound(format!("candidate {} in batch {}", c.candidate_id, c.batch_id)))
    }

    fn candidate_mut(&mut self, c: CandidateRef) -> Option<&mut crate::acquisition::Candidate> {
        self.batches.iter_mut().find(|b| b.id == c.batch_id)?.get_mut(c.candidate_id)
    }

    pub fn iteration_record(&self, iteration: usize) -> Result<&IterationRecord> {
        self.iterations
            .iter()
            .find(|r| r.iteration == iteration)
            .ok_or_else(|| Error::NotFound(format!("iteration {iteration}")))
    }

    pub fn latest_iteration(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }

    pub fn training_records(&self) -> Vec<&ExperimentRecord> {
        self.records.iter().filter(|r| !r.excluded).collect()
    }

    /// Grade labels of non-excluded records.
    pub fn training_labels(&self) -> Vec<bool> {
        self.training_records()
            .iter()
            .map(|r| r.battery_grade.unwrap_or_else(|| label_grade(&r.product, &self.config.grade)))
            .collect()
    }

    pub fn has_both_classes(&self) -> bool {
        let labels = self.training_labels();
        labels.iter().any(|l| *l) && labels.iter().any(|l| !*l)
    }

    /// Approved or edited candidates with neither a result nor an abandonment.
    pub fn open_candidates(&self) -> Vec<CandidateRef> {
        let mut out = Vec::new();
        for b in &self.batches {
            for c in &b.candidates {
                let r = CandidateRef {
                    batch_id: b.id,
                    candidate_id: c.id,
                };
                let pending = matches!(c.review_status, ReviewStatus::Approved | ReviewStatus::Edited)
                    && c.result_exp_id.is_none()
                    && !self.abandoned.iter().any(|a| a.candidate == r);
                if pending {
                    out.push(r);
                }
            }
        }
        out
    }

    pub fn next_batch_id(&self) -> usize {
        self.batches.iter().map(|b| b.id + 1).max().unwrap_or(0)
    }

    /// Monotone version counter: the number of events applied.
    pub fn version(&self) -> u64 {
        self.events.len() as u64
    }
}
