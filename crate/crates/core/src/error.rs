use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: String, right: String },

    #[error("operator `{0}` is not hermitian (defect {1:e})")]
    NotHermitian(String, f64),

    #[error("cutoff N_max={have} insufficient for `{family}`: requires N_max >= {required}")]
    CutoffInsufficient {
        family: String,
        have: usize,
        required: usize,
    },

    #[error("cutoff {required} required by `{family}` exceeds hard limit {limit}")]
    CutoffLimit {
        family: String,
        required: usize,
        limit: usize,
    },

    #[error("truncation: edge mass {mass:e} exceeds tolerance {tol:e} ({context})")]
    Truncation { mass: f64, tol: f64, context: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("hamiltonian `{0}` references dropped observable `{1}`")]
    NotExpressible(String, String),

    #[error("insensitive observable: slope {slope:e} below threshold {threshold:e}")]
    Insensitive { slope: f64, threshold: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
