//! The human-in-the-loop campaign: event-sourced state, expert commands,
//! iteration engine, persistence and scripted replay.

mod engine;
mod persist;
mod report;
mod script;
mod state;

pub use engine::{plan_iteration, recompute_flags, BoundaryPlane, Campaign};
pub use persist::{Store, EVENT_LOG, STATE_FILE};
pub use report::{
    model_quality, physicality_flags, AnalysisSource, IterationReport, ModelQuality, NEGATIVE_PREDICTION_FLAG,
};
pub use script::{run_script, CampaignScript, ScriptLogEntry, ScriptStep};
pub use state::{
    Abandonment, CampaignConfig, CampaignState, CandidateRef, ClassifierSnapshot, Event, IterationRecord,
    LoggedEvent, ModelSnapshot, Phase, WalkParams,
};
