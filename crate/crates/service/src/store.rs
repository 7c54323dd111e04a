//! On-disk session store: one directory per session id.
//!
//! ```text
//! <root>/<id>/session.json      creation record
//! <root>/<id>/trials/NN.jsonl   one trace per finished trial
//! <root>/<id>/report.json       written once the session is done
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use carefulbot::experiment::SessionReport;
use carefulbot::robot::TrialTrace;
use carefulbot::Error;

use crate::error::ServiceResult;
use crate::protocol::SessionCreated;

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> ServiceResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io(&root))?;
        Ok(SessionStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn trace_path(&self, id: &str, trial_idx: usize) -> PathBuf {
        self.session_dir(id).join("trials").join(format!("{trial_idx:02}.jsonl"))
    }

    pub fn create(&self, created: &SessionCreated) -> ServiceResult<()> {
        let dir = self.session_dir(&created.id).join("trials");
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let path = self.session_dir(&created.id).join("session.json");
        let json = serde_json::to_string_pretty(created).map_err(Error::from)?;
        fs::write(&path, json).map_err(io(&path))?;
        Ok(())
    }

    pub fn write_trace(&self, id: &str, trace: &TrialTrace) -> ServiceResult<()> {
        let path = self.trace_path(id, trace.trial);
        fs::write(&path, trace.to_jsonl()).map_err(io(&path))?;
        Ok(())
    }

    pub fn write_report(&self, id: &str, report: &SessionReport) -> ServiceResult<()> {
        let path = self.session_dir(id).join("report.json");
        fs::write(&path, report.to_json()?).map_err(io(&path))?;
        Ok(())
    }
}
