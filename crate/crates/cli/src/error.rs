use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A library call failed; `stage` names the pipeline step.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: acctrisk::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for numerical failures (separation, collinearity, no convergence), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source, .. } if source.is_numeric() => 2,
            _ => 1,
        }
    }
}

pub trait Stage<T> {
    fn stage(self, stage: impl Into<String>) -> CliResult<T>;
}

impl<T> Stage<T> for acctrisk::Result<T> {
    fn stage(self, stage: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Stage {
            stage: stage.into(),
            source,
        })
    }
}
