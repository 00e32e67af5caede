use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input (bad half-integer projection, negative momentum, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Input is well formed but outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of the operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The Laplace-space determinant vanished at the requested point.
    #[error("near-singular Laplace image: |Δ(p={p}, s={s})| = {magnitude:e}")]
    NearSingular {
        p: Complex64,
        s: Complex64,
        magnitude: f64,
    },

    /// The Bromwich contour passes too close to a singularity.
    #[error("contour error at s={s}: {reason}")]
    Contour { s: Complex64, reason: String },

    /// Numerical inversion did not converge between two refinement levels.
    #[error("accuracy error at z={z}, t={t}: refinement changed value by {change:e} (tolerance {tolerance:e})")]
    Accuracy {
        z: f64,
        t: f64,
        change: f64,
        tolerance: f64,
    },
}

impl Error {
    /// True for failures of the numerical engines rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NearSingular { .. } | Error::Contour { .. } | Error::Accuracy { .. })
    }
}
