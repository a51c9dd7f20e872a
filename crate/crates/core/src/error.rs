use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Möbius addition hit a vanishing denominator.
    #[error("singular gyrovector configuration: {0}")]
    Singularity(String),

    /// A chart or step left the representable range (spherical periodicity).
    #[error("range error: {0}")]
    Range(String),

    /// A caller broke an operation contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The weighted gyro-midpoint denominator vanished.
    #[error("degenerate aggregation: {0}")]
    DegenerateAggregation(String),

    /// Iterative numerics failed or produced non-finite values.
    #[error("numeric error: {message} (after {iterations} iterations)")]
    Numeric { message: String, iterations: usize },

    /// A gradient entry was not finite.
    #[error("non-finite gradient in parameter `{parameter}`")]
    NonFiniteGradient { parameter: String },

    /// Shapes of two arguments do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed input file.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag, used by the CLI on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singularity(_) => "singularity",
            Error::Range(_) => "range",
            Error::Contract(_) => "contract",
            Error::DegenerateAggregation(_) => "degenerate_aggregation",
            Error::Numeric { .. } => "numeric",
            Error::NonFiniteGradient { .. } => "non_finite_gradient",
            Error::Shape(_) => "shape",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
