use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong in the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("offspring mean {mean} is not supercritical (must exceed 1)")]
    SubcriticalMean { mean: f64 },
    #[error("bad pmf: {0}")]
    BadPmf(String),
    #[error("tail underflows to zero at x = {x}")]
    TailZero { x: f64 },
    #[error("population overflow in generation {generation}")]
    PopulationOverflow { generation: usize },
    #[error("conditional tail is empty above {threshold}")]
    ConditionalTailEmpty { threshold: f64 },
    #[error("series did not converge within {terms} terms")]
    NoConvergence { terms: usize },
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("tail integral diverges numerically")]
    NonIntegrableTail,
    #[error("exponent overflow: lambda * y = {0}")]
    Overflow(f64),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("could not tune to mean {target}: {reason}")]
    TuningFailed { target: f64, reason: String },
    #[error("parse error at column {column}: {message} (near `{token}`)")]
    Parse {
        column: usize,
        token: String,
        message: String,
    },
}

impl Error {
    pub(crate) fn bad(msg: impl Into<String>) -> Self {
        Error::BadParam(msg.into())
    }

    /// Numeric failures (overflow, quadrature, convergence) as opposed to
    /// invalid input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::TailZero { .. }
                | Error::PopulationOverflow { .. }
                | Error::ConditionalTailEmpty { .. }
                | Error::NoConvergence { .. }
                | Error::QuadratureFailure(_)
                | Error::NonIntegrableTail
                | Error::Overflow(_)
                | Error::TooLarge(_)
        )
    }
}
