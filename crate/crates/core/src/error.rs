use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Failures raised by the numerical routines.
///
/// Variants are split into precondition failures (bad input) and numerical
/// failures (the computation ran but could not certify a result); see
/// [`Error::is_numerical`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("missing asymptotic limit `{0}` for this nonlinearity")]
    MissingLimit(&'static str),
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error(
        "step-halving estimate {estimate:e} above tolerance {tol:e} after {halvings} halvings"
    )]
    ToleranceNotMet {
        tol: f64,
        estimate: f64,
        halvings: u32,
    },
    #[error("field vanishes on or too close to the boundary near {point:?}")]
    BoundaryZero { point: Vec<f64> },
    #[error("fixed point on the boundary of the search region at distance {distance:e}")]
    BoundaryFixedPoint { distance: f64 },
    #[error("Newton budget exhausted: {0}")]
    NewtonBudget(String),
    #[error("truncation ladder unstable: degrees {degrees:?} for N = {modes:?}")]
    UnstableLadder {
        modes: Vec<usize>,
        degrees: Vec<i32>,
    },
}

impl Error {
    /// `true` for failures of the computation itself, `false` for rejected
    /// inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::ToleranceNotMet { .. }
                | Error::BoundaryZero { .. }
                | Error::BoundaryFixedPoint { .. }
                | Error::NewtonBudget(_)
                | Error::UnstableLadder { .. }
        )
    }
}

impl Error {
    /// Stable snake-case tag for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::MissingLimit(_) => "missing_limit",
            Error::NonFinite { .. } => "non_finite",
            Error::ToleranceNotMet { .. } => "tolerance_not_met",
            Error::BoundaryZero { .. } => "boundary_zero",
            Error::BoundaryFixedPoint { .. } => "boundary_fixed_point",
            Error::NewtonBudget(_) => "newton_budget",
            Error::UnstableLadder { .. } => "unstable_ladder",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
