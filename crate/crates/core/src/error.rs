use thiserror::Error;

/// Failures raised by the numerical core.
///
/// Sensor and hypothesis indices carried in variants are 0-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row}, threshold {threshold})")]
    NotPositiveDefinite { row: usize, pivot: f64, threshold: f64 },

    #[error("conditional variance {variance} is not positive; model is numerically singular")]
    NonPositiveConditionalVariance { variance: f64 },

    #[error("Schur complement {schur} too small to extend the inverse")]
    SingularExtension { schur: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("correlation {rho} must lie strictly inside (-1, 1)")]
    InvalidRho { rho: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("sensor {sensor} is not available for upload")]
    SensorUnavailable { sensor: usize },

    #[error("no candidate sensors remain")]
    Exhausted,

    #[error("no trajectories to aggregate")]
    EmptyInput,

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
