use thiserror::Error;

/// Every failure the engine reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("plaintext overflow: |m|·2^scale = {0:e} exceeds headroom")]
    PlaintextOverflow(f64),
    #[error("scale mismatch: {0} vs {1}")]
    ScaleMismatch(f64, f64),
    #[error("modulus mismatch: level {0} vs level {1}")]
    ModulusMismatch(usize, usize),
    #[error("key mismatch: key {0:016x} vs key {1:016x}")]
    KeyMismatch(u64, u64),
    #[error("constant {0} exceeds multiplier cap {1}")]
    ConstantCap(i64, i64),
    #[error("value is not a bit: {0}")]
    NotABit(i64),
    #[error("modulus index {0} is not in the chain")]
    NotInChain(usize),
    #[error("refresh needed before {0}")]
    RefreshNeeded(String),
    #[error("refresh chain exhausted at gate {gate_index}")]
    ChainExhausted { gate_index: usize },
    #[error("dimension {0} exceeds the dense simulation guard")]
    DimensionGuard(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("rewrite did not reach a normal form within {steps} steps (last term {last})")]
    NonConfluence { steps: usize, last: String },
    #[error("audit failure at record {index}: {reason}")]
    Audit { index: usize, reason: String },
    #[error("secret key material routed to node {0}")]
    KeyHygiene(usize),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Decode(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
