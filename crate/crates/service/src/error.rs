use civility_core::panels::{PanelError, PanelId};
use civility_core::simulant::SimError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("rate the pending panels first: {}", list(.0))]
    RatingPending(Vec<PanelId>),
    #[error("the conversation is closed")]
    SessionClosed,
    #[error("panel {0} has no pending rating")]
    NotPending(PanelId),
    #[error("{field}={value} outside {min}..={max}")]
    Range { field: String, value: i64, min: i64, max: i64 },
    #[error("{0}")]
    Phase(String),
    #[error("{0} was already submitted")]
    Duplicate(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    #[error("completion backend failed: {0}")]
    Backend(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("config: {0}")]
    Config(String),
}

fn list(ids: &[PanelId]) -> String {
    ids.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(", ")
}

impl ServiceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "NOT_FOUND",
            ServiceError::RatingPending(_) => "RATING_PENDING",
            ServiceError::SessionClosed => "SESSION_CLOSED",
            ServiceError::NotPending(_) => "NOT_PENDING",
            ServiceError::Range { .. } => "OUT_OF_RANGE",
            ServiceError::Phase(_) => "PHASE_MISMATCH",
            ServiceError::Duplicate(_) => "DUPLICATE",
            ServiceError::InvalidRequest(_) => "INVALID_REQUEST",
            ServiceError::InvalidFlow(_) => "INVALID_FLOW",
            ServiceError::Backend(_) => "BACKEND_ERROR",
            ServiceError::Generation(_) => "GENERATION_FAILED",
            ServiceError::Storage(_) => "STORAGE_ERROR",
            ServiceError::Config(_) => "CONFIG_ERROR",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::NotFound(_) => 404,
            ServiceError::RatingPending(_)
            | ServiceError::SessionClosed
            | ServiceError::NotPending(_)
            | ServiceError::Phase(_)
            | ServiceError::Duplicate(_) => 409,
            ServiceError::Range { .. } => 422,
            ServiceError::InvalidRequest(_) | ServiceError::InvalidFlow(_) => 400,
            ServiceError::Backend(_) | ServiceError::Generation(_) => 502,
            ServiceError::Storage(_) | ServiceError::Config(_) => 500,
        }
    }
}

impl From<SimError> for ServiceError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Llm(e) => ServiceError::Backend(e.to_string()),
            SimError::Closed => ServiceError::SessionClosed,
            SimError::EmptyMessage => ServiceError::InvalidRequest("message is empty".into()),
            e => ServiceError::Generation(e.to_string()),
        }
    }
}

impl From<PanelError> for ServiceError {
    fn from(e: PanelError) -> Self {
        match e {
            PanelError::Llm(e) => ServiceError::Backend(e.to_string()),
            e => ServiceError::Generation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Storage(e.to_string())
    }
}
