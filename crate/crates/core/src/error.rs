use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate direction")]
    DegenerateDirection,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("ratio undefined on equator")]
    RatioOnEquator,
    #[error("ratio undefined")]
    RatioUndefined,
    #[error("invalid spectral model: {0}")]
    InvalidModel(String),
    #[error("degenerate horizon")]
    DegenerateHorizon,
    #[error("epsilon out of theorem range")]
    EpsilonOutOfRange,
    #[error("contraction factor non-positive")]
    ContractionNonPositive,
    #[error("trajectory lacks diagnostics channel")]
    MissingDiagnostics,
    #[error("insufficient points")]
    InsufficientPoints,
    #[error("non-finite input")]
    NonFinite,
    #[error("overflow in product oracle")]
    Overflow,
    #[error("empty input")]
    EmptyInput,
    #[error("power iteration did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown suite: {0}")]
    UnknownSuite(String),
    #[error("all replicates failed")]
    AllReplicatesFailed,
}
