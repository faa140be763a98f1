use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "series did not reach tolerance {tol:e} within {cap} terms (tail bound {tail_bound:e})"
    )]
    ToleranceNotReached {
        tol: f64,
        cap: usize,
        tail_bound: f64,
    },

    #[error("adaptive quadrature failed: {0}")]
    Quadrature(String),

    #[error("special function evaluation failed: {0}")]
    SpecialFunction(String),

    #[error("kernel is not certified positive definite: {0}")]
    NotCertified(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("rectangle corner ({0}, {1}) is not a grid point")]
    OffGrid(f64, f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "witness gap {gap:e} is below 5 Monte Carlo standard errors ({standard_error:e}); \
         raise n_paths to at least {required_paths}"
    )]
    DegenerateWitness {
        gap: f64,
        standard_error: f64,
        required_paths: u64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
