use thiserror::Error;

/// Errors produced by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CspError {
    #[error("invalid clause: {0}")]
    InvalidClause(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("density out of range: {0}")]
    DensityOutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("no crossing: {0}")]
    NoCrossing(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CspError {
    /// Short machine-readable tag used in single-line CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            CspError::InvalidClause(_) => "invalid-clause",
            CspError::Dimension { .. } => "dimension",
            CspError::UnsupportedFamily(_) => "unsupported-family",
            CspError::InvalidPermutation(_) => "invalid-permutation",
            CspError::DensityOutOfRange(_) => "density-out-of-range",
            CspError::InvalidArgument(_) => "invalid-argument",
            CspError::ResourceLimit(_) => "resource-limit",
            CspError::NoCrossing(_) => "no-crossing",
            CspError::Parse(_) => "parse",
            CspError::Io(_) => "io",
        }
    }

    /// Process exit code: 2 usage, 3 resource limit, 4 data / no crossing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CspError::ResourceLimit(_) => 3,
            CspError::NoCrossing(_) | CspError::Io(_) => 4,
            CspError::Parse(_) => 4,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for CspError {
    fn from(e: std::io::Error) -> Self {
        CspError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CspError>;
