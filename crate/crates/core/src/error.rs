use thiserror::Error;

/// Errors produced by the pose mining pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate pose: all joints coincide")]
    DegeneratePose,
    #[error("dimension mismatch: expected {expected} joints, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("joint index {index} out of range for a {joints}-joint pose")]
    IndexOutOfRange { index: usize, joints: usize },
    #[error("invalid joint subset: {0}")]
    InvalidSubset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("frame {0} is not covered by the cycle speed curve")]
    OutOfRange(u32),
    #[error("no clip matches found")]
    NoMatches,
    #[error("phase {0} has no training frames")]
    EmptyPhase(&'static str),
    #[error("observation sequence has zero probability under the model")]
    ImpossibleObservation,
    #[error("prediction contains no flight phase")]
    NoFlightPhase,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
