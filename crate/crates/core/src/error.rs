use thiserror::Error;

/// Errors raised while building, validating or analyzing discrimination problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state {index} has norm {norm:.12}, which is not unit within tolerance")]
    NonUnitState { index: usize, norm: f64 },

    #[error("invalid priors: {0}")]
    InvalidPriors(String),

    #[error(
        "states are linearly dependent (smallest/largest singular value = {ratio:.3e}); \
         unambiguous discrimination is impossible"
    )]
    LinearlyDependent { ratio: f64 },

    #[error("numerical rank deficiency in the state matrix: {0}")]
    RankDeficient(String),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("smallest singular value has multiplicity {multiplicity}; use the linear-programming test")]
    DegenerateSmallestValue { multiplicity: usize },

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error("invalid symmetry description: {0}")]
    InvalidSymmetry(String),

    #[error("measurement rejected: {0}")]
    InvalidMeasurement(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
