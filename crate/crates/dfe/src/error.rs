use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum DfeError {
    #[error("pauli index {k} out of range for {n} qubits (must be < 4^n)")]
    IndexOutOfRange { k: u128, n: usize },

    #[error("qubit count {n} unsupported (must be in 1..={max})")]
    QubitCountUnsupported { n: usize, max: usize },

    #[error("dimension mismatch: operator on {op_qubits} qubits, state on {state_qubits}")]
    DimensionMismatch {
        op_qubits: usize,
        state_qubits: usize,
    },

    #[error("exhaustive enumeration over 4^{n} Pauli operators exceeds the cap of n <= {cap}")]
    EnumerationCapExceeded { n: usize, cap: usize },

    #[error("pauli product has imaginary phase; operands anticommute")]
    ImaginaryPhase,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid stabilizer tableau: {0}")]
    InvalidTableau(String),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("characteristic value is zero for sampled index {k}; sampler must never emit it")]
    ZeroCharValue { k: u128 },

    #[error("truncation with beta={beta} removed the entire support")]
    EmptySupport { beta: f64 },

    #[error("channel target must be unitary")]
    NonUnitaryTarget,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DfeError>;
