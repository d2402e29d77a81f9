use thiserror::Error;

/// Errors produced by configuration handling, simulation, and sweeps.
#[derive(Debug, Error)]
pub enum SimError {
    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration violated one or more invariants. Every violation is
    /// listed so the user can fix them in one pass.
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    /// Scenario or sweep file could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("sweep would expand to {points} points, exceeding the cap of {cap}")]
    CapExceeded { points: usize, cap: usize },

    #[error("missing sweep axis: {0}")]
    MissingAxis(String),

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }
}
