use thiserror::Error;

/// Errors raised by the measurement engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("operator is not self-adjoint (‖M − M†‖ = {residual:.3e})")]
    NotSelfAdjoint { residual: f64 },

    #[error("operator is not a projection (‖P² − P‖ = {residual:.3e})")]
    NotProjection { residual: f64 },

    #[error("density operator invalid: {reason}")]
    InvalidDensity { reason: String },

    #[error("state vector not normalized (‖ψ‖ = {norm})")]
    NotNormalized { norm: f64 },

    #[error("spectral family invalid: {reason}")]
    InvalidSpectral { reason: String },

    #[error("outcome set invalid: {reason}")]
    InvalidOutcomes { reason: String },

    #[error("invalid instrument: {reason}")]
    InvalidInstrument { reason: String },

    #[error("unknown outcome {0}")]
    UnknownOutcome(f64),

    #[error("conditioning on an event of probability {probability:.3e}")]
    ZeroProbabilityConditioning { probability: f64 },

    #[error("instrument has {found} outcomes, a yes/no pair needs exactly 2")]
    NotBinaryOutcomes { found: usize },

    #[error("intra-eigenspace unitary for outcome {outcome} invalid: {reason}")]
    IncompatibleUnitaries { outcome: f64, reason: String },

    #[error("bad weights: {reason}")]
    BadWeights { reason: String },

    #[error("bad parameters: {reason}")]
    BadParameters { reason: String },

    #[error("parameter vector has length {found}, expected {expected}")]
    BadParameterLength { expected: usize, found: usize },

    #[error("unknown model family '{0}'")]
    UnknownFamily(String),

    #[error("contingency table is empty")]
    EmptyTable,

    #[error("standard error of the estimate is zero")]
    DegenerateVariance,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
