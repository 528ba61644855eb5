//! Data shipped with the crate: the experiment table, the surrogate spaces,
//! grade standards, the replay script and the default replication study.

use std::collections::BTreeMap;

use crate::campaign::CampaignScript;
use crate::dataset::{load_dataset, ExperimentRecord, GradeSpec};
use crate::error::{Error, Result};
use crate::replication::StudyConfig;
use crate::sampling::SurrogateSpaceSpec;

pub const RECORDS_CSV: &str = include_str!("../../../data/table_s4.csv");
pub const SPACES_JSON: &str = include_str!("../../../data/table_s3.json");
pub const GRADES_JSON: &str = include_str!("../../../data/table_s1.json");
pub const SCRIPT_JSON: &str = include_str!("../../../data/campaign_script.json");
pub const STUDY_JSON: &str = include_str!("../../../data/study_config.json");

pub fn records() -> Result<Vec<ExperimentRecord>> {
    load_dataset(RECORDS_CSV.as_bytes()).map_err(|e| e.context("bundled experiment table"))
}

pub fn spaces() -> Result<Vec<SurrogateSpaceSpec>> {
    let spaces: Vec<SurrogateSpaceSpec> = serde_json::from_str(SPACES_JSON)?;
    for s in &spaces {
        s.validate()?;
    }
    Ok(spaces)
}

pub fn space(label: &str) -> Result<SurrogateSpaceSpec> {
    spaces()?
        .into_iter()
        .find(|s| s.label == label)
        .ok_or_else(|| Error::NotFound(format!("bundled space `{label}`")))
}

/// Grade standards keyed by name; `this_study` is the campaign default.
pub fn grade_standards() -> Result<BTreeMap<String, GradeSpec>> {
    Ok(serde_json::from_str(GRADES_JSON)?)
}

pub fn campaign_script() -> Result<CampaignScript> {
    Ok(serde_json::from_str(SCRIPT_JSON)?)
}

pub fn study_config() -> Result<StudyConfig> {
    Ok(serde_json::from_str(STUDY_JSON)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_parse() {
        assert_eq!(records().unwrap().len(), 77);
        let labels: Vec<String> = spaces().unwrap().into_iter().map(|s| s.label).collect();
        assert_eq!(labels, ["A", "B", "C", "D", "E", "F"]);
        assert_eq!(grade_standards().unwrap()["this_study"], GradeSpec::default());
        campaign_script().unwrap();
        study_config().unwrap().validate().unwrap();
    }
}
