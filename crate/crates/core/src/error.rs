use thiserror::Error;

/// Errors raised by the propagation engine and its supporting modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: cannot parse `{key}`: {reason}")]
    Parse {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("packet centre x0 = {x0} lies outside the grid [{x_min}, {x_max})")]
    PacketOutsideGrid { x0: f64, x_min: f64, x_max: f64 },

    #[error("pivot breakdown at row {row}: |pivot| = {magnitude:e}")]
    PivotBreakdown { row: usize, magnitude: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid size {found:?} does not match the expected {expected:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("transform length {0} is not a power of two")]
    NonPowerOfTwo(usize),

    #[error("need at least {needed} distinct samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("cutoff samples are not uniformly spaced in log(delta)")]
    NonLogUniform,

    #[error("1D reflectivity did not converge: |dR| = {change:e} under {refinement} refinement")]
    NoConvergence {
        refinement: &'static str,
        change: f64,
    },

    #[error("energy must be positive, got {0}")]
    NonPositiveEnergy(f64),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
