use thiserror::Error;

/// Errors raised by channel construction, synthesis, and decoding.
#[derive(Debug, Error)]
pub enum Error {
    /// An object violates one of its structural invariants (Hermiticity, trace, PSD, ...).
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// Caller supplied arguments that are out of range or inconsistent.
    #[error("invalid argument: {0}")]
    Validation(String),

    /// A channel-spec or split-spec document failed to load.
    #[error("spec entry `{location}`: {message}")]
    Spec { location: String, message: String },

    /// The requested computation exceeds a configured resource cap.
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// A measurement outcome distribution collapsed numerically.
    #[error("degenerate measurement: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Resource(_) => 3,
            Error::Degenerate(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
