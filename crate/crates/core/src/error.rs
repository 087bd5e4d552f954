use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied parameter is outside its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Covariance factorization failed even after adding the jitter.
    #[error("matrix not positive definite (smallest eigenvalue {min_eigenvalue:e}, jitter {jitter:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, jitter: f64 },

    /// Sewing sums did not settle; carries the level-difference table.
    #[error("sewing diverged: {reason} (level differences {level_differences:?})")]
    Divergence {
        reason: String,
        level_differences: Vec<f64>,
    },

    #[error("Picard iteration failed after {iterations} iterations (contraction factor {contraction:.4})")]
    MaxIterations { iterations: usize, contraction: f64 },

    #[error("point {x} lies outside the representable box [-{half_width}, {half_width}]")]
    OutOfBox { x: f64, half_width: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Precondition(_)
                | Error::Domain(_)
                | Error::GridMismatch(_)
                | Error::Format(_)
        )
    }
}
