use alloc::string::String;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the analytic and simulation layers.
///
/// Variants split into input problems (bad shapes, violated model
/// assumptions, out-of-domain arguments) and numerical-contract failures
/// (solver did not converge, spectrum on the wrong side). See
/// [`Error::is_numerical`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: expected dimension {expected}, found {found}")]
    Shape { what: String, expected: usize, found: usize },

    #[error("{what}: contains a non-finite entry")]
    NonFinite { what: String },

    #[error("{what}: {property}")]
    Malformed { what: String, property: String },

    #[error("{what}: not irreducible")]
    Reducible { what: String },

    #[error("volatility assumption violated: sigma[{phase}] = {sigma} must be strictly positive")]
    NonPositiveVolatility { phase: usize, sigma: f64 },

    #[error("stability assumption violated: stationary drift alpha.mu = {drift} must be strictly negative")]
    NonNegativeDrift { drift: f64 },

    #[error("{what} = {value} is outside its domain")]
    Domain { what: String, value: f64 },

    #[error("lambda = {lambda} too small: need lambda > {min} so that every up rate is positive and every down rate negative")]
    LambdaTooSmall { lambda: f64, min: f64 },

    #[error("boundary variant `{variant}` requires its boundary specification")]
    MissingSpec { variant: &'static str },

    #[error("invariant subspace selection is ambiguous: eigenvalue {re}{im:+}i lies within the imaginary-axis band")]
    Ambiguous { re: f64, im: f64 },

    #[error("stable invariant subspace has dimension {found}, expected {expected}")]
    SubspaceDimension { expected: usize, found: usize },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("{what} is numerically singular")]
    Singular { what: &'static str },

    #[error("{what} is not strictly stable: max real part of spectrum {max_real:e}")]
    Unstable { what: &'static str, max_real: f64 },

    #[error("only {got} regeneration cycles recorded, need at least {need}; use a longer horizon")]
    InsufficientCycles { got: usize, need: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    /// True for failures of a numerical contract, false for rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Ambiguous { .. }
                | Error::SubspaceDimension { .. }
                | Error::Convergence { .. }
                | Error::Singular { .. }
                | Error::Unstable { .. }
        )
    }

    pub(crate) fn malformed(what: impl Into<String>, property: impl Into<String>) -> Self {
        Error::Malformed { what: what.into(), property: property.into() }
    }

    pub(crate) fn domain(what: impl Into<String>, value: f64) -> Self {
        Error::Domain { what: what.into(), value }
    }
}
