use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("operation requires the {expected} model flavor")]
    WrongFlavor { expected: &'static str },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix `{what}` is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { what: &'static str, pivot: usize },

    #[error("non-positive determinant {det:e} where a positive-definite covariance was expected")]
    NonPositiveDeterminant { det: f64 },

    #[error("spectrum has a root on the real axis at {at}; add mechanical damping to regularize it")]
    RealAxisRoot { at: String },

    #[error("rational function has a pole on the real axis at {at}")]
    RealAxisPole { at: String },

    #[error("integrand decays too slowly for the real-line integral to converge (relative degree {relative_degree})")]
    DivergentIntegral { relative_degree: isize },

    #[error("polynomial root finding failed for degree {degree}")]
    RootFinding { degree: usize },

    #[error("singular pole-evaluation system while solving the filter equations")]
    SingularFilterSystem,

    #[error("retrodiction did not converge across prior scales (relative change {change:e})")]
    NonConvergence { change: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
