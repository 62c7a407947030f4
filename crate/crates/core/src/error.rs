use thiserror::Error;

use crate::context::ContextLabel;
use crate::pipeline::DeviceSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value is outside its documented domain. `field` names the
    /// offending parameter so callers (and the CLI) can report it.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("no authentication model for context {context:?} with device set {device_set:?}")]
    NoModel {
        context: ContextLabel,
        device_set: DeviceSet,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("linear system is not positive definite")]
    NotPositiveDefinite,

    #[error("unsupported schema version {found} (this build reads up to {supported})")]
    SchemaVersion { found: u32, supported: u32 },

    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn dimension(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            got,
        }
    }
}
