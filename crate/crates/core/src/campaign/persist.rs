//! On-disk campaign: `state.json` written atomically plus an append-only
//! `events.jsonl` log.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::state::{CampaignState, LoggedEvent};
use crate::error::{Error, Result};

pub const STATE_FILE: &str = "state.json";
pub const EVENT_LOG: &str = "events.jsonl";

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state_path(&self) -> PathBuf {
        self.dir.join(STATE_FILE)
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(EVENT_LOG)
    }

    pub fn exists(&self) -> bool {
        self.state_path().exists() || self.log_path().exists()
    }

    pub fn append(&self, event: &LoggedEvent) -> Result<()> {
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(self.log_path())?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Writes to a temporary sibling and renames it over the state file.
    pub fn write_state(&self, state: &CampaignState) -> Result<()> {
        let tmp = self.dir.join(format!("{STATE_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(&mut f, state)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.state_path())?;
        Ok(())
    }

    pub fn read_log(&self) -> Result<Vec<LoggedEvent>> {
        let path = self.log_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: LoggedEvent =
                serde_json::from_str(&line).map_err(|e| Error::from(e).context(format!("event log line {}", i + 1)))?;
            if e.seq != out.len() as u64 + 1 {
                return Err(Error::Integrity(format!(
                    "event log line {} has seq {} (expected {})",
                    i + 1,
                    e.seq,
                    out.len() + 1
                )));
            }
            out.push(e);
        }
        Ok(out)
    }

    /// Loads the state file, or rebuilds it from the log when the log is
    /// ahead (a crash between appending an event and renaming the state).
    pub fn load(&self) -> Result<CampaignState> {
        let log = self.read_log()?;
        let state: Option<CampaignState> = if self.state_path().exists() {
            let f = File::open(self.state_path())?;
            Some(serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::from(e).context("reading state file"))?)
        } else {
            None
        };
        match state {
            Some(s) if s.version() == log.len() as u64 => Ok(s),
            Some(s) if s.version() > log.len() as u64 => Err(Error::Integrity(format!(
                "state file is at version {} but the event log has only {} events",
                s.version(),
                log.len()
            ))),
            _ if log.is_empty() => Err(Error::NotFound(format!("campaign in {}", self.dir.display()))),
            _ => {
                tracing::warn!("state file behind event log; rebuilding from {} events", log.len());
                let state = CampaignState::replay(log.into_iter().map(|e| e.event))?;
                self.write_state(&state)?;
                Ok(state)
            }
        }
    }
}
