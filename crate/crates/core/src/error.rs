use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("branch-and-bound node limit of {0} exceeded")]
    NodeLimitExceeded(usize),
    #[error("simplicial QP did not reach its KKT tolerance within {0} iterations")]
    MaxInnerIterations(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("direction is not a descent direction (slope {0})")]
    NondescentDirection(f64),
    #[error("serious step ratio has nonpositive denominator {0}")]
    DegenerateDenominator(f64),
    #[error("block {block}: {points} points exceed the enumeration cap of {cap}")]
    TooLarge { block: usize, points: u128, cap: usize },
    #[error("block {block}: variable {var} is continuous and not fixed")]
    NotPureInteger { block: usize, var: usize },
    #[error("no optimality certificate: gap {0} above tolerance")]
    NoCertificate(f64),
    #[error("reduce is missing the packet of block {0}")]
    MissingPacket(usize),
    #[error("worker failed while processing block {block}: {message}")]
    WorkerFailure { block: usize, message: String },
    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("line search did not terminate within {0} backtracks")]
    LineSearchFailed(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
