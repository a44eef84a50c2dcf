use thiserror::Error;

/// Every failure mode reported by the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid tolerances: {0}")]
    InvalidTolerances(String),
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("index ({0}, {1}) out of range for Alice dimension {2}")]
    IndexOutOfRange(usize, usize, usize),
    #[error("family is not commuting (commutator norm {0:.3e})")]
    NonCommutingFamily(f64),
    #[error("family member {0} is not normal (||[C, C^dag]|| = {1:.3e})")]
    NonNormal(usize, f64),
    #[error("no Bob vector aligns with the kernel in the given Alice basis")]
    NoAlignment,
    #[error("rank drop violated: r(rho) {0} -> {1}, r(rho^TA) {2} -> {3}")]
    RankDropViolation(usize, usize, usize, usize),
    #[error("no full-rank Alice direction found after {0} attempts")]
    DirectionNotFound(usize),
    #[error("canonical form mismatch: {0}")]
    CanonicalMismatch(String),
    #[error("state is not PPT (min eigenvalue of partial transpose {0:.3e})")]
    NotPpt(f64),
    #[error("rank {rank} is below the local rank {local}")]
    RankTooLow { rank: usize, local: usize },
    #[error("rank {rank} exceeds the local rank {local}")]
    RankTooHigh { rank: usize, local: usize },
    #[error("decomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("kernel dimensions {0} + {1} are below the required {2}")]
    RankSumTooHigh(usize, usize, usize),
    #[error("the chosen base rows are identically dependent")]
    DegenerateRowChoice,
    #[error("polynomial system is non-generic: {0}")]
    NonGeneric(String),
    #[error("combinatorial budget of {0} subsets exhausted")]
    CombinatorialBudget(usize),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),
    #[error("malformed document: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, Error>;
