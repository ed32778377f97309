use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point has {got} coordinates, {expected} phase space expects {expected_dim}")]
    DimensionMismatch {
        expected: &'static str,
        expected_dim: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a {required} system, got {got}")]
    WrongSystem {
        required: &'static str,
        got: &'static str,
    },

    #[error("iteration count {0} exceeds the configured maximum {1}")]
    IterationBudget(u64, u64),

    #[error("seed region rejected: escape fraction {fraction:.3} exceeds limit {limit:.3}")]
    EscapeRate { fraction: f64, limit: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("tower construction failed: {0}")]
    Construction(String),

    #[error("truncation mass {mass:.3e} exceeds the configured bound {bound:.3e}")]
    TruncationMass { mass: f64, bound: f64 },

    #[error("partition enumeration of {attempted} elements exceeds the budget of {budget}")]
    PartitionBudget { attempted: usize, budget: usize },

    #[error("unsupported rate composition: {0}")]
    UnsupportedComposition(String),

    #[error("insufficient data: {usable} usable points, need at least {need}")]
    InsufficientData { usable: usize, need: usize },

    #[error("invalid tower state: {0}")]
    InvalidState(String),

    #[error("malformed tower file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
