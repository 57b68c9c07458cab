use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the routine.
    Domain {
        what: &'static str,
        value: f64,
    },
    /// A structural precondition failed (shapes, set relations, sizes).
    Precondition(String),
    /// A quadrature, series or tail certificate could not reach the
    /// requested tolerance within its budget.
    Tolerance {
        what: &'static str,
        achieved: f64,
        requested: f64,
    },
    /// A constructed object failed its own certificate.
    Certificate {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },
    /// `u_j = 0` while `(Lu)_j` is not, so no bounded potential exists.
    Inconsistent {
        index: Vec<i64>,
        lu: f64,
    },
    /// Least-squares fit residual too large for the sampled grid.
    GridTooCoarse {
        residual: f64,
        threshold: f64,
    },
    /// The regularization parameter search failed to bracket its target.
    LambdaRange {
        low: f64,
        high: f64,
        target: f64,
    },
    /// A dense factorization broke down.
    Factorization(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "domain error: {what} (got {value})"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Tolerance {
                what,
                achieved,
                requested,
            } => write!(
                f,
                "{what}: tolerance not met (achieved {achieved:e}, requested {requested:e})"
            ),
            Error::Certificate {
                what,
                residual,
                tolerance,
            } => write!(
                f,
                "{what}: certificate failed (residual {residual:e} > tolerance {tolerance:e})"
            ),
            Error::Inconsistent { index, lu } => write!(
                f,
                "u vanishes at {index:?} but the operator value there is {lu:e}"
            ),
            Error::GridTooCoarse {
                residual,
                threshold,
            } => write!(
                f,
                "t-grid too coarse: fit residual {residual:e} exceeds {threshold:e}"
            ),
            Error::LambdaRange { low, high, target } => write!(
                f,
                "discrepancy target {target:e} not bracketed by lambda in [{low:e}, {high:e}]"
            ),
            Error::Factorization(what) => write!(f, "factorization failed: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64) -> Error {
    Error::Domain { what, value }
}
