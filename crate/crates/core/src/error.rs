use thiserror::Error;

/// Errors raised by the simulator and its operators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("x-wavenumber k must be nonzero")]
    ZeroWavenumber,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("profile is not monotone: |a| * sup|phi'| / sigma = {ratio} must be < 1")]
    NonMonotoneProfile { ratio: f64 },

    #[error("grid does not resolve the profile: {0}")]
    UnderResolved(String),

    #[error("Neumann iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("integration unstable at t = {t}: field norm {norm:e} exceeds bound {bound:e}")]
    StepUnstable { t: f64, norm: f64, bound: f64 },

    #[error("fit window holds {count} samples, at least {required} are needed")]
    InsufficientWindow { count: usize, required: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
