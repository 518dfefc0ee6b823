use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty vector or matrix")]
    Empty,

    #[error("non-finite entry")]
    NonFinite,

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("state squared norm {norm_sqr} exceeds 1")]
    SuperNormalized { norm_sqr: f64 },

    #[error("relation undefined: {0}")]
    RelationUndefined(String),

    #[error("phase undefined: triple product magnitude {magnitude:e} is below threshold")]
    PhaseUndefined { magnitude: f64 },

    #[error("input is not real: {0}")]
    NotReal(String),

    #[error("quarter-wave plate angle {angle} deg is not supported in v1 (only 0 deg)")]
    UnsupportedAngle { angle: f64 },

    #[error("unknown path label `{0}`")]
    UnknownPath(String),

    #[error("beam displacer would shift amplitude past the last lane `{0}`")]
    LaneOverflow(String),

    #[error("malformed element: {0}")]
    MalformedElement(String),

    #[error("phase grid invalid: {0}")]
    PhaseGrid(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("channel is not complete: max |sum E_k^dag E_k - I| = {deviation:e}")]
    IncompleteChannel { deviation: f64 },

    #[error("dimension {0} is not supported")]
    UnsupportedDimension(usize),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid counting model: {0}")]
    InvalidModel(String),

    #[error("separability soundness violated: declared separable state gives margin {margin:e}")]
    SoundnessViolation { margin: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
