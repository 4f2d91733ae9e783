use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("cannot resolve the cylinder: {0}")]
    Resolution(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("eigensolver did not converge: {0}")]
    EigenFailure(String),

    #[error("Newton diverged at step {step} (t = {time}): residual {residual:e}")]
    NewtonDiverged { step: usize, time: f64, residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient snapshots: requested {requested}, available {available}")]
    InsufficientSnapshots { requested: usize, available: usize },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("point ({x}, {y}) is outside the meshed domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
