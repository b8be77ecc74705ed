use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("observable must be Hermitian (phase i^{phase})")]
    NonHermitian { phase: u8 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dense backend capped at {cap} qubits, got {n}")]
    WidthCap { cap: usize, n: usize },
    #[error("Bloch vector norm^2 = {norm_sq} is not 1")]
    NotPure { norm_sq: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("session has no copies left")]
    CopiesExhausted,
    #[error("copy already measured in single-shot mode")]
    DoubleMeasurement,
    #[error("unsupported session operation: {0}")]
    SessionMode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
