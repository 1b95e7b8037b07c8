use thiserror::Error;

/// Errors raised by the curve, Szegő, expansion and oracle machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge (last residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("interior map fit residual {residual:e} exceeds tolerance {tol:e}")]
    FitFailure { residual: f64, tol: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("kernel evaluated at coincident points (|zeta - z| = {0:e})")]
    Coincidence(f64),

    #[error("point within guard distance of a branch cut: {0}")]
    CutProximity(String),

    #[error("contraction condition fails at n = {n} (q = {q:e}); smallest admissible degree is {n_min}")]
    Contraction { n: usize, q: f64, n_min: usize },

    #[error("Gram matrix is ill-conditioned or indefinite (condition estimate {0:e}); lower the degree or rescale the curve")]
    Conditioning(f64),

    #[error("branch tracking disagreement: {0}")]
    Branch(String),

    #[error("eigenvalue solver failed: {0}")]
    Eigen(String),

    #[error("gamma function pole at {0}")]
    Infinity(f64),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical contract violations map to CLI exit code 2, everything
    /// attributable to the input maps to 1.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Json(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
