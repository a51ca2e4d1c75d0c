use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 1")]
    NonStochastic { row: usize, sum: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),

    #[error("chain is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("invalid radius {0}: must lie in [0, 2]")]
    InvalidRadius(f64),

    #[error("removing zero columns leaves row {row} with sum {sum}")]
    NotReducible { row: usize, sum: f64 },

    #[error("stationary masses of states {0} and {1} are tied")]
    TiedStationaryMass(usize, usize),

    #[error("partition group {0} has no preimage")]
    EmptyGroup(usize),

    #[error("partition group {0} has zero mass")]
    ZeroGroupMass(usize),

    #[error("aggregated row {row} sums to {sum}; weights and reduced vector are inconsistent")]
    NonStochasticResult { row: usize, sum: f64 },

    #[error("instance too large for the oracle: {size} > {max}")]
    TooLarge { size: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
