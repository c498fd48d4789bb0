use thiserror::Error;

/// Errors raised by the library. CLI failures map onto these through [`crate::cli`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("vertices {0} and {1} are not adjacent")]
    NotAnEdge(String, String),
    #[error("transverse edge at spine index {0} projects to an endpoint of [x,y] (need 1 <= i <= d-1)")]
    ProjectionAtEndpoint(i64),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid vertex: {0}")]
    InvalidVertex(String),
    #[error("shadow base must differ from its interior vertex")]
    DegenerateShadow,
    #[error("shadow base does not match the measure base point")]
    BaseMismatch,
    #[error("{0} is not an attainable Busemann value")]
    InvalidLevel(i64),
    #[error("series is not summable: {0}")]
    NotSummable(String),
    #[error("sign of the tail cannot be decided: {0}")]
    SignIndeterminate(String),
    #[error("locally constant function has no value on the shadow of {0}")]
    IncompleteCover(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error("evaluation routes disagree: {0}")]
    RouteMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
