use thiserror::Error;

/// Errors returned by the simulator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("alphabet must have at least 2 symbols (got {0})")]
    AlphabetTooSmall(u32),

    #[error("symbol {symbol} is outside an alphabet of size {size}")]
    SymbolOutOfRange { symbol: u32, size: u32 },

    #[error("strings are over different alphabets ({0} vs {1})")]
    AlphabetMismatch(u32, u32),

    #[error("relative suffix distance of two empty strings is undefined")]
    BothEmpty,

    #[error("register has no classical header")]
    MissingHeader,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("no synchronization string found after {0} attempts")]
    ConstructionFailed(u32),

    #[error("invalid noise pattern: {0}")]
    InvalidPattern(String),

    #[error("input does not match the noise pattern: {0}")]
    PatternMismatch(String),

    #[error("instance too large for exhaustive processing: {0}")]
    TooLarge(String),

    #[error("infeasible protocol parameters: {0}")]
    InfeasibleParams(String),

    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid experiment configuration: {field}: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
