use thiserror::Error;

pub type Result<T> = std::result::Result<T, PmError>;

#[derive(Debug, Error)]
pub enum PmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("norm band contains no lattice modes: [{xi_min}, {xi_max}]")]
    EmptyBand { xi_min: f64, xi_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("time {0} is not a node of the time grid")]
    NotANode(f64),

    #[error("point is singular: {0}")]
    Singular(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("region is not inside the box: {0}")]
    Region(String),

    #[error("fixed-point iteration diverged after {iterations} iterations")]
    Diverged {
        iterations: usize,
        certificate: Box<crate::solver::ContractionCertificate>,
    },

    #[error("fixed-point iteration reached max_iter = {iterations} (last residual {residual:e})")]
    MaxIterations {
        iterations: usize,
        residual: f64,
        certificate: Box<crate::solver::ContractionCertificate>,
    },

    #[error("field file format: {0}")]
    Format(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PmError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        PmError::InvalidArgument(msg.into())
    }
}
