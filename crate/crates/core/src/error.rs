use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("need at least 2 points to fit a Gaussian, got {0}")]
    EmptyOrSingleton(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance is not positive definite")]
    CholeskyFailure,

    #[error("set sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("synthetic set is empty")]
    EmptySynthSet,

    #[error("symmetric eigendecomposition did not converge")]
    EigFailure,

    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("log argument b/delta = {0} is not greater than 1")]
    NonPositiveLogArgument(f64),

    #[error("horizon t must be at least 1")]
    InvalidHorizon,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    #[error("generation {generation}: {source}")]
    AtGeneration {
        generation: usize,
        #[source]
        source: Box<CoreError>,
    },
}

impl CoreError {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        CoreError::Invalid {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_generation(self, generation: usize) -> Self {
        CoreError::AtGeneration {
            generation,
            source: Box::new(self),
        }
    }
}
