use alloc::string::String;
use core::fmt;

/// Errors produced by the simulation and analytics routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument is outside its domain.
    InvalidArgument { name: &'static str, value: f64 },
    /// A configuration field violates an invariant.
    InvalidConfig { field: &'static str, reason: String },
    /// `‖ĥ‖²` too small to form an MR combiner.
    DegenerateEstimate { norm_sq: f64 },
    /// A matrix that must be positive (semi-)definite is not.
    NotPositiveDefinite { what: &'static str, min_eigenvalue: f64 },
    /// A quantity that must be non-negative came out negative beyond slack.
    NegativeVariance { what: &'static str, value: f64 },
    /// An iterative or quadrature routine did not reach its tolerance.
    NoConvergence { what: &'static str, detail: String },
    /// The characteristic function decays too slowly to pick a truncation point.
    TruncationSearch { t_reached: f64, magnitude: f64 },
    /// Bisection could not bracket the requested quantile.
    BracketFailure { p: f64, lo: f64, hi: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument { name, value } => {
                write!(f, "invalid argument {name} = {value}")
            }
            Error::InvalidConfig { field, reason } => write!(f, "invalid config `{field}`: {reason}"),
            Error::DegenerateEstimate { norm_sq } => {
                write!(f, "degenerate channel estimate (squared norm {norm_sq:e})")
            }
            Error::NotPositiveDefinite { what, min_eigenvalue } => write!(
                f,
                "{what} is not positive semi-definite (min eigenvalue {min_eigenvalue:e})"
            ),
            Error::NegativeVariance { what, value } => {
                write!(f, "{what} is negative beyond numerical slack: {value:e}")
            }
            Error::NoConvergence { what, detail } => write!(f, "{what} did not converge: {detail}"),
            Error::TruncationSearch { t_reached, magnitude } => write!(
                f,
                "characteristic function decays too slowly: |phi(t)|/t = {magnitude:e} at t = {t_reached:e}"
            ),
            Error::BracketFailure { p, lo, hi } => {
                write!(f, "could not bracket quantile {p} in [{lo:e}, {hi:e}]")
            }
        }
    }
}

impl Error {
    /// True for failures of numerical routines, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidArgument { .. } | Error::InvalidConfig { .. })
    }
}

pub type Result<T> = core::result::Result<T, Error>;
