use thiserror::Error;

/// Errors raised while building or transforming measurement objects.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e} exceeds {tol:.3e})")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("columns do not form an isometry (deviation {deviation:.3e})")]
    NotIsometry { deviation: f64 },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("invalid outcome space: {0}")]
    InvalidOutcomes(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),

    #[error("invalid indirect measurement model: {0}")]
    InvalidModel(String),

    #[error("map is not completely positive (minimum Choi eigenvalue {min_eigenvalue:.6e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("map is not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("map is not positive: output eigenvalue {min_eigenvalue:.6e} on a sampled pure state")]
    NotPositive { min_eigenvalue: f64 },

    #[error("observable is degenerate (outcome {label:?} has rank {rank})")]
    DegenerateObservable { label: String, rank: usize },

    #[error("outcome spaces differ: {0}")]
    OutcomeMismatch(String),

    #[error("incompatible with the observable (deviation {deviation:.3e})")]
    Incompatible { deviation: f64 },

    #[error("outcome set has zero probability; the collective state is undefined there")]
    ZeroProbability,

    #[error("scheme is not affine in the input state (deviation {deviation:.3e})")]
    NotAffine { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
