use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {dim} exceeds the supported maximum of {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid subsystem layout: {0}")]
    InvalidSubsystems(String),

    #[error("basis labels are invalid: {0}")]
    InvalidLabels(String),

    #[error("non-finite amplitude at index {0}")]
    NonFinite(usize),

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("density matrix is invalid: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid fidelity vector: {0}")]
    InvalidFidelities(String),

    #[error("probability `{name}` = {value} is outside {range}")]
    ProbabilityOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid device parameters: {0}")]
    InvalidDevice(String),

    #[error("pair count must be at least 1")]
    EmptyRun,

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("malformed transcript line {line}: {reason}")]
    TranscriptParse { line: usize, reason: String },

    #[error("{path}: {reason}")]
    Io { path: String, reason: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}
