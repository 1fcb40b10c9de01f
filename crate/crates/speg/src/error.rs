use thiserror::Error;

/// Errors surfaced by the library.
///
/// Contract violations (bad dimensions, non-PD cost matrices, malformed
/// configuration) are reported eagerly, before any iteration starts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix must be positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("spectral radius of the virtual closed loop is {rho:.9}; it must stay below {limit:.9}")]
    SpectralRadius { rho: f64, limit: f64 },

    #[error("invariant-set recursion did not settle within k_cap = {k_cap} rounds")]
    NoConvergence { k_cap: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("ladder invariant violated: {0}")]
    Ladder(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
