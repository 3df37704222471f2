use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size parameter a{index} must be finite and positive, got {value}")]
    InvalidSize { index: usize, value: f64 },

    #[error("posture entry d{index} is not finite ({value})")]
    NonFinitePosture { index: usize, value: f64 },

    #[error("posture entry d{index} = {value} is outside its joint limit [{lo}, {hi}]")]
    OutOfLimits { index: usize, value: f64, lo: f64, hi: f64 },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),

    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("all particle probabilities are zero")]
    DegenerateWeights,

    #[error("particle weights are not normalized (cumulative total {0})")]
    UnnormalizedWeights(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("missing reference data for subset {0}")]
    MissingReference(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
