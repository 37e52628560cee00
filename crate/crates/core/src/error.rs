use thiserror::Error;

/// Errors raised by the simulation, quadrature and Monte Carlo layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters fall outside the regime in which an operation is meaningful.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: path has d={path}, kernel requested d={requested}")]
    DimensionMismatch { path: usize, requested: usize },

    /// Covariance matrix could not be factorized even after jitter.
    #[error("covariance factorization failed at pivot {pivot} (jitter {jitter:e})")]
    Factorization { pivot: usize, jitter: f64 },

    /// Circulant embedding produced a negative eigenvalue. Never expected for fGn.
    #[error("internal error: circulant embedding has negative eigenvalue {value:e} at index {index}")]
    Embedding { index: usize, value: f64 },

    /// `(λ+ε)(ρ+γ) − μ²` was non-positive; indicates a kernel bug.
    #[error("singular kernel: determinant {det:e} at tau = {tau:?}")]
    Singularity { det: f64, tau: [f64; 4] },

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Regime(_)
                | Error::Config(_)
                | Error::DimensionMismatch { .. }
                | Error::Format(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
