use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error("hypothesis violated ({condition}): {detail}")]
    Hypothesis {
        condition: &'static str,
        detail: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("spectral deficiency: {0}")]
    SpectralDeficiency(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
