use emocal_core::scheduler::InfeasibleReason;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("there are no events to schedule")]
    NoEvents,
    #[error("no feasible schedule: {0}")]
    Infeasible(InfeasibleReason),
    #[error("no {0} model is loaded")]
    ModelMissing(String),
    #[error("journal corrupt at entry {seq}: {message}")]
    CorruptLog { seq: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::ValidationFailed(_) => "validation_failed",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::NoEvents => "no_events",
            ServiceError::Infeasible(_) => "infeasible",
            ServiceError::ModelMissing(_) => "model_missing",
            ServiceError::CorruptLog { .. } => "corrupt_log",
            ServiceError::Io(_) => "io",
            ServiceError::Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let details = match self {
            ServiceError::Infeasible(reason) => serde_json::to_value(reason).unwrap_or_default(),
            ServiceError::CorruptLog { seq, .. } => serde_json::json!({ "seq": seq }),
            _ => serde_json::Value::Null,
        };
        ErrorBody {
            code: self.code().to_owned(),
            message: self.to_string(),
            details,
        }
    }
}

/// The JSON shape of every API error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: serde_json::Value,
}
