use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the pipeline and the command-line tool. Each variant
/// maps to one process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: farfield_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn stage(stage: impl Into<String>, source: farfield_core::Error) -> Self {
        Error::Stage {
            stage: stage.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for bad or missing data, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data { .. } | Error::Io { .. } => 3,
            Error::Stage { source, .. } if source.is_numerical() => 4,
            Error::Stage { .. } => 3,
        }
    }
}

/// Attaches a stage name to core results.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for farfield_core::Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| Error::stage(stage, e))
    }
}
