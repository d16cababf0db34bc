use thiserror::Error;

/// Errors raised by kernel evaluation, sampling and verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Log-gamma evaluated at a non-positive integer.
    #[error("log-gamma pole at s = {0}")]
    Pole(f64),

    /// An iterative or adaptive procedure stopped before reaching its tolerance.
    #[error("{what} did not converge: estimated error {achieved:e} exceeds tolerance {tolerance:e}")]
    NonConvergence {
        what: &'static str,
        achieved: f64,
        tolerance: f64,
    },

    /// Gamma bias requires the shape parameters to multiply out to the mean.
    #[error("product of shape parameters {product} does not match the mean {mean}")]
    MeanMismatch { product: f64, mean: f64 },

    /// The requested transformation is not implemented for this law.
    #[error("{operation} is not supported for {kind}")]
    Unsupported {
        operation: &'static str,
        kind: &'static str,
    },

    /// A symbolic operation met a term it cannot represent in closed form.
    #[error("no closed form: {0}")]
    NoClosedForm(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
