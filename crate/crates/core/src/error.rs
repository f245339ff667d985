use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Array or image dimensions disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Input violates a documented precondition.
    #[error("validation failed: {0}")]
    Validation(String),
    /// Kinematic graph is not a tree rooted at a single link.
    #[error("invalid kinematic structure: {0}")]
    Structure(String),
    /// Input uses a feature outside the supported subset.
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    /// A scalar argument is outside its allowed range.
    #[error("value out of range: {0}")]
    Range(String),
    /// Configuration value is invalid.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    /// Geometric input is degenerate (coincident points, zero norm).
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
