use std::io;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("function is not deterministic: {0}")]
    NonDeterministic(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("training diverged at iteration {iter}: loss = {loss}")]
    Diverged { iter: usize, loss: f64 },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unknown word id {0}")]
    UnknownWord(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier, used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::NotScalar(_) => "not_scalar",
            Error::Config(_) => "config",
            Error::NonDeterministic(_) => "non_deterministic",
            Error::Insufficient(_) => "insufficient",
            Error::Diverged { .. } => "diverged",
            Error::Format(_) => "format",
            Error::UnknownWord(_) => "unknown_word",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
