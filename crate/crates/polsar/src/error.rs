use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular (reciprocal condition {rcond:e})")]
    SingularMatrix { rcond: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("negative diagonal entry {value:e} at index {index}")]
    NegativeDiagonal { index: usize, value: f64 },
    #[error("number of looks differ: {0} vs {1}")]
    LooksMismatch(f64, f64),
    #[error("number of looks {looks} is below the dimension {q}")]
    LooksBelowDimension { looks: f64, q: usize },
    #[error("simulation needs an integer number of looks, got {0}")]
    NonIntegerLooks(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("outside the density support: {0}")]
    DomainError(String),
    #[error("Rényi order must lie in (0, 1), got {0}")]
    BetaOutOfRange(f64),
    #[error("numerical error: {0}")]
    NumericalError(String),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("duplicate class {0:?}")]
    DuplicateClass(String),
    #[error("assignment lists cover different segments")]
    MismatchedSegments,
    #[error("negative intensity {value:e} at pixel {pixel}")]
    NegativeIntensity { pixel: usize, value: f64 },
    #[error("degenerate marginals: chance agreement equals one")]
    DegenerateMarginals,
    #[error("kappa variance must be positive")]
    ZeroVariance,
    #[error("palette has no color for {0:?}")]
    PaletteMissingClass(String),
    #[error("invalid segment map: {0}")]
    InvalidSegmentMap(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what} at {location}: {message}")]
    Format {
        what: &'static str,
        location: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NotHermitian { .. }
                | Error::NonFinite(_)
                | Error::NegativeDiagonal { .. }
                | Error::LooksMismatch(..)
                | Error::LooksBelowDimension { .. }
                | Error::NonIntegerLooks(_)
                | Error::EmptySample
                | Error::BetaOutOfRange(_)
                | Error::UnknownClass(_)
                | Error::DuplicateClass(_)
                | Error::MismatchedSegments
                | Error::PaletteMissingClass(_)
                | Error::InvalidSegmentMap(_)
                | Error::InvalidArgument(_)
                | Error::Format { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
