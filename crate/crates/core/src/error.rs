use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Eigenpairs recovered before an eigensolver gave up.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialSpectrum {
    pub eigenvalues: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("LDL factorization broke down at pivot {pivot} (|d| = {magnitude:e}, shift {shift:e})")]
    Breakdown { pivot: usize, magnitude: f64, shift: f64 },

    #[error("eigensolver did not converge: {converged}/{requested} pairs after {iterations} iterations")]
    NotConverged { requested: usize, converged: usize, iterations: usize, partial: Box<PartialSpectrum> },

    #[error("domain has no interior grid nodes")]
    EmptyDomain,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical kernels (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Breakdown { .. } | Error::NotConverged { .. })
    }
}
