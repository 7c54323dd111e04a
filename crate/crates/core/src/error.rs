use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("non-finite {loss} loss in phase {phase} at step {step}")]
    NonFiniteLoss {
        phase: &'static str,
        step: usize,
        loss: &'static str,
    },

    #[error("model file corrupt at byte offset {offset}: {message}")]
    ModelFormat { offset: u64, message: String },

    #[error("gradient check failed at {parameter}: relative error {relative_error:.3e}")]
    GradCheck { parameter: String, relative_error: f64 },

    #[error("model was never trained")]
    Untrained,

    #[error("classifier: {0}")]
    Classifier(String),

    #[error("pick controller diverged: {0}")]
    Diverged(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidProfile(_) => "invalid_profile",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::ModelFormat { .. } => "model_format",
            Error::GradCheck { .. } => "gradcheck",
            Error::Untrained => "untrained",
            Error::Classifier(_) => "classifier",
            Error::Diverged(_) => "diverged",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
