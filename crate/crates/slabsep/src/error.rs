use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rate {name} = {value} outside (0, 1]")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("configuration length {got}, expected {expected}")]
    ConfigurationLength { got: usize, expected: usize },
    #[error("initial pair is not componentwise ordered (eta must dominate zeta)")]
    UnorderedPair,
    #[error("point ({x}, {y}) outside the environment region")]
    OutOfRegion { x: i64, y: i64 },
    #[error("target ({x}, {y}) not reachable from the source by an up-right path")]
    Unreachable { x: i64, y: i64 },
    #[error("no admissible path inside the restricted band")]
    NoPath,
    #[error("empty source set")]
    EmptySources,
    #[error("state space 2^{n} exceeds the configured cap 2^{cap}")]
    StateCapExceeded { n: usize, cap: usize },
    #[error("path enumeration budget {budget} exceeded")]
    PathBudgetExceeded { budget: u64 },
    #[error("timeout fraction {fraction:.4} exceeds epsilon {epsilon} at horizon {horizon}")]
    TimeoutFractionExceeded {
        fraction: f64,
        epsilon: f64,
        horizon: f64,
    },
    #[error("trajectory does not carry particle labels")]
    MissingLabels,
    #[error("{0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
