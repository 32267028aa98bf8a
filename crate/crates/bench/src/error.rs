use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] stopdet_core::Error),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid run configuration: {0}")]
    Invalid(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 2 input, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use stopdet_core::Error as Core;
        match self {
            BenchError::Core(Core::Input(_)) => 2,
            BenchError::Core(Core::NotPositiveDefinite { .. } | Core::Numerical(_)) => 3,
            BenchError::Core(Core::Io(_)) | BenchError::Io(_) => 4,
            BenchError::Config { .. } | BenchError::Invalid(_) => 2,
            BenchError::Csv(e) if e.is_io_error() => 4,
            BenchError::Csv(_) => 2,
            BenchError::Json(e) if e.is_io() => 4,
            BenchError::Json(_) => 2,
        }
    }
}
