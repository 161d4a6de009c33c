use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("graph generation failed: {0}")]
    GenerationFailure(String),
    #[error("weight invariants violated: {}", .0.join("; "))]
    InvariantViolation(Vec<String>),
    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),
    #[error("shadow construction needs a different split: {0}")]
    ResampleRequired(String),
    #[error("audit inconclusive: {0}")]
    AuditInconclusive(String),
    #[error("insufficient information: {0}")]
    InsufficientInformation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("intractable: {0}")]
    Intractable(String),
    #[error("rate fit undefined: {0}")]
    FitUndefined(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
