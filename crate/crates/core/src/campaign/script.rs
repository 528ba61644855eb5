//! Scripted campaigns: a list of expert actions replayed against a record
//! table. Used to re-enact a historical campaign from its experiment log.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::engine::Campaign;
use super::state::{CampaignConfig, CandidateRef, Phase};
use crate::acquisition::{ReviewStatus, Strategy};
use crate::dataset::ExperimentRecord;
use crate::error::{Error, Result};
use crate::sampling::{ConditionPoint, SurrogateSpaceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScriptStep {
    /// Bulk import of historical records.
    Import { exp_ids: Vec<u32> },
    Iterate { strategy: String, seed: u64 },
    /// The experts edit the first candidates of the latest generated batch to
    /// the conditions that were actually run, ingest the results against
    /// them and reject the rest.
    Adopt { exp_ids: Vec<u32> },
    /// Results ingested without a candidate.
    Ingest { exp_ids: Vec<u32> },
    /// Changes the temperature-gap constraint of the active space.
    SetMinDeltaT { value: f64 },
    ActivateSpace { label: String },
    SetPhase { phase: Phase },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignScript {
    pub name: String,
    pub initial_space: String,
    pub steps: Vec<ScriptStep>,
}

/// One line of the script's progress, for logs and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLogEntry {
    pub step: usize,
    pub action: String,
    pub iteration: usize,
    pub phase: Phase,
    pub n_records: usize,
}

fn lookup<'a>(records: &'a [ExperimentRecord], id: u32) -> Result<&'a ExperimentRecord> {
    records
        .iter()
        .find(|r| r.exp_id == id)
        .ok_or_else(|| Error::NotFound(format!("experiment {id} in the record table")))
}

fn clean(record: &ExperimentRecord) -> ExperimentRecord {
    let mut r = record.clone();
    r.battery_grade = None;
    r
}

/// Replays `script` from scratch. With `dir`, the campaign is persisted there.
pub fn run_script(
    script: &CampaignScript,
    records: &[ExperimentRecord],
    config: CampaignConfig,
    spaces: Vec<SurrogateSpaceSpec>,
    dir: Option<&Path>,
) -> Result<(Campaign, Vec<ScriptLogEntry>)> {
    let mut c = match dir {
        Some(d) => Campaign::create(d, config, spaces, &script.initial_space)?,
        None => Campaign::new(config, spaces, &script.initial_space)?,
    };
    let mut log = Vec::new();
    for (i, step) in script.steps.iter().enumerate() {
        let action = apply_step(&mut c, step, records).map_err(|e| e.context(format!("script step {}", i + 1)))?;
        let s = c.state();
        tracing::info!(step = i + 1, %action, iteration = s.iteration, "script step done");
        log.push(ScriptLogEntry {
            step: i + 1,
            action,
            iteration: s.iteration,
            phase: s.phase,
            n_records: s.records.len(),
        });
    }
    Ok((c, log))
}

fn apply_step(c: &mut Campaign, step: &ScriptStep, records: &[ExperimentRecord]) -> Result<String> {
    match step {
        ScriptStep::Import { exp_ids } => {
            let rs: Vec<ExperimentRecord> = exp_ids
                .iter()
                .map(|&id| lookup(records, id).map(clean))
                .collect::<Result<_>>()?;
            c.import_records(&rs)?;
            Ok(format!("import {}", rs.len()))
        }
        ScriptStep::Iterate { strategy, seed } => {
            let s = Strategy::from_name(strategy)
                .ok_or_else(|| Error::Invalid(format!("unknown strategy `{strategy}`")))?;
            let (batch, _) = c.run_iteration(s, *seed)?;
            Ok(format!("iterate {} -> batch {} ({} candidates)", s.name(), batch.id, batch.candidates.len()))
        }
        ScriptStep::Adopt { exp_ids } => {
            let batch = c
                .state()
                .batches
                .iter()
                .rev()
                .find(|b| b.strategy != Strategy::Manual)
                .ok_or_else(|| Error::InvalidState("no generated batch to adopt from".into()))?
                .clone();
            let mut linked = 0;
            for (j, &id) in exp_ids.iter().enumerate() {
                let r = clean(lookup(records, id)?);
                match batch.candidates.get(j) {
                    Some(cand) if cand.review_status == ReviewStatus::Proposed => {
                        let cref = CandidateRef {
                            batch_id: batch.id,
                            candidate_id: cand.id,
                        };
                        let point = ConditionPoint {
                            controls: r.controls,
                            initial: r.initial,
                            provenance: cand.point.provenance,
                            seed_origin: cand.point.seed_origin,
                        };
                        c.review(cref, ReviewStatus::Edited, Some(point))?;
                        c.ingest(&r, Some(cref))?;
                        linked += 1;
                    }
                    _ => c.ingest(&r, None)?,
                }
            }
            for cand in &batch.candidates {
                let cref = CandidateRef {
                    batch_id: batch.id,
                    candidate_id: cand.id,
                };
                if c.state().candidate(cref)?.review_status == ReviewStatus::Proposed {
                    c.review(cref, ReviewStatus::Rejected, None)?;
                }
            }
            Ok(format!("adopt {linked} of {} into batch {}", exp_ids.len(), batch.id))
        }
        ScriptStep::Ingest { exp_ids } => {
            for &id in exp_ids {
                c.ingest(&clean(lookup(records, id)?), None)?;
            }
            Ok(format!("ingest {}", exp_ids.len()))
        }
        ScriptStep::SetMinDeltaT { value } => {
            let mut spec = c.state().active_spec()?.clone();
            spec.min_delta_t = *value;
            c.set_active_space(spec)?;
            Ok(format!("min_delta_t = {value}"))
        }
        ScriptStep::ActivateSpace { label } => {
            c.activate_space(label)?;
            Ok(format!("activate space {label}"))
        }
        ScriptStep::SetPhase { phase } => {
            c.set_phase(*phase)?;
            Ok(format!("phase {phase:?}"))
        }
    }
}
