use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("density is not certified nonnegative (sum of |f_j| over j != 0 is {l1})")]
    NotCertified { l1: f64 },

    #[error("density value {value} at x = {x} is below the negativity tolerance")]
    NegativeDensity { x: f64, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample size {n} is too small (need at least {min})")]
    SampleTooSmall { n: usize, min: usize },

    #[error("dimension parameter must be at least 1")]
    ZeroDimension,

    #[error("noise coefficient vanishes at frequency {j}")]
    VanishingNoiseCoefficient { j: usize },

    #[error("no dimension k <= {k_max} satisfies the optimal-dimension rule")]
    DimensionNotFound { k_max: usize },

    #[error("smoothness sequence is not square-summable (L_a diverges)")]
    ClassNotSummable,

    #[error("{construction}: condition ({condition}) violated: lhs = {lhs}, rhs = {rhs}")]
    ConditionViolated {
        construction: &'static str,
        condition: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("exponent {exponent} overflows; rescale the inputs")]
    Overflow { exponent: f64 },

    #[error("{what} = {value} exceeds the supported maximum {max}")]
    TooLarge {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("noise model has no simulatable density")]
    NotSimulatable,

    #[error("calibration check failed: {0}")]
    Calibration(String),

    #[error("regime is not tabulated in closed form: {0}")]
    RegimeNotTabulated(String),

    #[error("values must be strictly positive")]
    NonPositive,

    #[error("{failed} of {total} records failed to parse; first errors: {details}")]
    Ingest {
        failed: usize,
        total: usize,
        details: String,
    },

    #[error("malformed sample file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
