use thiserror::Error;

/// Errors produced by executors, kernels, formats and solvers.
///
/// Every variant carries owned data so that deferred task failures can be
/// stored in a queue and surfaced again at synchronization time.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("out of memory: requested {requested} bytes, {available} bytes available")]
    OutOfMemory { requested: u64, available: u64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("placement error: {0}")]
    Placement(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("dispatch error: {0}")]
    Dispatch(String),

    #[error("collective usage error: {0}")]
    Collective(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("unsupported format at line {line}: {msg}")]
    UnsupportedFormat { line: usize, msg: String },

    #[error("{solver} breakdown at iteration {iteration}")]
    Breakdown {
        solver: &'static str,
        iteration: usize,
    },

    #[error("task failed: {0}")]
    Task(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
