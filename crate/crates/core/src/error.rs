use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum SolverError {
    /// A stage recurrence produced a non-finite state component.
    #[error("non-finite state in {location} at stage {stage}")]
    Divergence { location: &'static str, stage: usize },

    /// A Monte-Carlo trajectory failed; the path index identifies the sample.
    #[error("path {path} failed: {source}")]
    PathFailure {
        path: usize,
        #[source]
        source: Box<SolverError>,
    },

    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// State, noise, or coefficient lengths disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A text input (problem description file) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The spectral-radius estimator hit a non-finite map value.
    #[error("spectral estimate failed: {0}")]
    SpectralFailure(String),
}

impl SolverError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SolverError::InvalidInput(msg.into())
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        SolverError::DimensionMismatch(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
