use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] adapts_core::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// Error kind used as the prefix of the one-line message on stderr.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(adapts_core::Error::Checkpoint(_)) => "checkpoint",
            CliError::Core(adapts_core::Error::Shape(_) | adapts_core::Error::DimensionMismatch { .. }) => "shape",
            CliError::Core(adapts_core::Error::Diverged(_)) => "diverged",
            CliError::Core(_) => "core",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
        }
    }
}
