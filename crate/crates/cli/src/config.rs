use std::path::Path;

use carefulbot::experiment::StudyConfig;
use carefulbot::gan::GanConfig;
use carefulbot::surrogate::ProfileFamilyParams;
use carefulbot::Error;
use serde::{Deserialize, Serialize};

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub surrogate: ProfileFamilyParams,
    pub gan: GanConfig,
    pub study: StudyConfig,
    /// Profiles per class in a deployment set.
    pub deploy_per_class: usize,
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            surrogate: ProfileFamilyParams::default(),
            gan: GanConfig::default(),
            study: StudyConfig::default(),
            deploy_per_class: 10,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> carefulbot::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
