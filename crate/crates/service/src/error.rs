use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    SessionNotFound(String),

    #[error("query {got} is not the pending query{}", match .pending { Some(p) => format!(" ({p})"), None => String::new() })]
    StaleQuery { got: u64, pending: Option<u64> },

    #[error("a session needs at least 3 objects, got {0}")]
    TooFewObjects(usize),

    #[error("object {chosen} is not one of the offered options {options:?}")]
    InvalidChoice { chosen: usize, options: [usize; 2] },

    #[error("{0}")]
    InvalidRequest(String),

    #[error("malformed request body: {0}")]
    InvalidBody(String),

    #[error("session storage: {0}")]
    Storage(String),

    #[error(transparent)]
    Learner(#[from] rckl::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::SessionNotFound(_) => "session_not_found",
            ServiceError::StaleQuery { .. } => "stale_query",
            ServiceError::TooFewObjects(_) => "too_few_objects",
            ServiceError::InvalidChoice { .. } => "invalid_choice",
            ServiceError::InvalidRequest(_) => "invalid_request",
            ServiceError::InvalidBody(_) => "invalid_body",
            ServiceError::Learner(rckl::Error::InvalidPolicyParam(_)) => "invalid_policy",
            ServiceError::Learner(_) => "learner_error",
            ServiceError::Storage(_) | ServiceError::Io(_) | ServiceError::Json(_) => "storage_error",
        }
    }
}
