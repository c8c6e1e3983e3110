use thiserror::Error;

use crate::quadrature::QuadratureRule;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Gauss-Hermite order {0}: expected 2 <= M <= 64")]
    InvalidOrder(usize),

    #[error("tensor rule needs {nodes} nodes, above the cap of {cap}")]
    Capacity { nodes: u128, cap: usize },

    #[error("quadrature reduction failed: {reason}")]
    ReductionFailed {
        reason: String,
        partial: Box<QuadratureRule>,
    },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported stepper: {0}")]
    UnsupportedStepper(String),

    #[error("unsupported interpolation: {0}")]
    UnsupportedInterpolation(String),

    #[error("non-finite value at slice n={n}, node m={m}, control #{control}")]
    NumericalBlowup { n: usize, m: usize, control: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid interval [{lo}, {hi}]: {reason}")]
    InvalidInterval { lo: f64, hi: f64, reason: String },

    #[error("config {field} (line {line}): {message}")]
    Config {
        line: usize,
        field: String,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("surface file: {0}")]
    SurfaceFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidOrder(_) => "invalid-order",
            Error::Capacity { .. } => "capacity",
            Error::ReductionFailed { .. } => "reduction-failed",
            Error::InvalidPoint(_) => "invalid-point",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::Configuration(_) => "configuration",
            Error::InvalidModel(_) => "invalid-model",
            Error::UnsupportedStepper(_) => "unsupported-stepper",
            Error::UnsupportedInterpolation(_) => "unsupported-interpolation",
            Error::NumericalBlowup { .. } => "numerical-blowup",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InvalidInterval { .. } => "invalid-interval",
            Error::Config { .. } => "config",
            Error::Dimension(_) => "dimension",
            Error::SurfaceFormat(_) => "surface-format",
            Error::Io(_) => "io",
        }
    }
}
