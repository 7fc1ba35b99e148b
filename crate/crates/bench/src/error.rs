use thiserror::Error;

/// Harness failures, grouped by process exit code.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("benchmark integrity error: {0}")]
    Integrity(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 1,
            BenchError::Data(_) => 2,
            BenchError::Integrity(_) => 3,
        }
    }
}

impl From<sparsexec_core::Error> for BenchError {
    fn from(e: sparsexec_core::Error) -> Self {
        use sparsexec_core::Error as E;
        match e {
            E::Config(_) | E::Usage(_) | E::Dispatch(_) => BenchError::Usage(e.to_string()),
            _ => BenchError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for BenchError {
    fn from(e: serde_json::Error) -> Self {
        BenchError::Data(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Data(e.to_string())
    }
}

pub type BenchResult<T> = Result<T, BenchError>;
