use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] tempalign::Error),

    /// Request is well-formed JSON but fails validation; one message per field.
    #[error("invalid request: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// A required artifact (chain, emulator) is not loaded.
    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ServiceError::Invalid(vec![msg.into()])
    }

    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> u8 {
        use tempalign::Error as E;
        match self {
            ServiceError::BadRequest(_) => 2,
            ServiceError::Invalid(_) | ServiceError::Core(E::Config(_)) => 3,
            ServiceError::Core(E::Schema(_) | E::Format(_) | E::Data(_) | E::Json(_) | E::Csv(_)) => 4,
            ServiceError::NotFound(_) | ServiceError::Unavailable(_) | ServiceError::Core(E::Io { .. }) => 5,
            ServiceError::Core(E::Domain(_) | E::NotRepresented(_)) => 6,
            ServiceError::Core(E::Sampler(_) | E::ForwardFailures { .. } | E::Training(_)) => 7,
            ServiceError::Internal(_) => 1,
        }
    }
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;
