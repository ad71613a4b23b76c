use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lifted dimension {dim}^{power} exceeds the cap of {cap} entries")]
    DimensionOverflow { dim: usize, power: u32, cap: usize },
    #[error("expected a lifted vector of power 2, got power {0}")]
    WrongPower(u32),
    #[error("singular pair iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("input is zero")]
    ZeroInput,
    #[error("Schatten exponent must be >= 1, got {0}")]
    InvalidSchatten(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample {index} is not unit-normalized (norm {norm})")]
    NotNormalized { index: usize, norm: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("assignment violates the constraint set: {0}")]
    InfeasibleAssignment(String),
    #[error("rejection budget of {0} draws exhausted")]
    RejectionBudget(usize),
    #[error("solver budget exhausted: {0}")]
    SolverBudget(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
