use alloc::string::String;

/// Errors raised by grid construction, assembly, solvers and measurements.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {found} values but the grid has {expected} nodes")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid drift: {0}")]
    InvalidDrift(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("profile not available: {0}")]
    UnsupportedProfile(String),
    #[error("source is not admissible: {0}")]
    InadmissibleSource(String),
    #[error("row {0} of the system matrix is structurally zero")]
    SingularRow(usize),
    #[error("invalid solver parameter: {0}")]
    InvalidSolverParameter(String),
    #[error("measurement not possible: {0}")]
    Measurement(String),
}

pub type Result<T> = core::result::Result<T, Error>;
