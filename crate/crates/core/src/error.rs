use thiserror::Error;

/// Errors raised by the library. Every variant maps to a short stable code
/// (see [`Error::code`]) so front ends can report failures on one line.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("trap depth must be <= 0 Hz (light-shift sign convention), got {0} Hz")]
    SignConvention(f64),

    #[error("no magic point: beta4 = {0} (needs beta4 > 0)")]
    NoMagicPoint(f64),

    #[error("no zero crossing: beta2 = 0 (linear polarization)")]
    NoZeroCrossing,

    #[error("unphysical configuration: {0}")]
    Unphysical(String),

    #[error("value {value} outside allowed range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} subintervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("ill-conditioned normal equations (condition number {0:e})")]
    IllConditioned(f64),

    #[error(
        "fit did not converge after {iterations} iterations (chi2 = {chi_square:e}, last relative step {last_step:e})"
    )]
    FitFailure {
        iterations: usize,
        chi_square: f64,
        last_step: f64,
    },

    #[error("oscillation frequency underdetermined: {0}")]
    FrequencyAmbiguity(String),

    #[error("invalid timeline: {0}")]
    Timeline(#[from] crate::transfer::Violation),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument { .. } => "invalid-argument",
            Error::SignConvention(_) => "sign-convention",
            Error::NoMagicPoint(_) => "no-magic-point",
            Error::NoZeroCrossing => "no-zero-crossing",
            Error::Unphysical(_) => "unphysical-configuration",
            Error::OutOfRange { .. } => "out-of-range",
            Error::Quadrature { .. } => "numerical-failure",
            Error::Timeline(_) => "invalid-timeline",
            Error::RankDeficient(_) => "rank-deficient",
            Error::IllConditioned(_) => "ill-conditioned",
            Error::FitFailure { .. } => "fit-failure",
            Error::FrequencyAmbiguity(_) => "frequency-ambiguity",
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {x}")))
    }
}
