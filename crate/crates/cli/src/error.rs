use std::path::PathBuf;

use thiserror::Error;

/// Failures of the pipeline, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Csv { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<epinp::Error> for CliError {
    fn from(e: epinp::Error) -> Self {
        use epinp::Error as E;
        match e {
            E::Parameter(m) | E::Usage(m) | E::Domain(m) => CliError::Config(m),
            E::Data(m) | E::Initialization(m) => CliError::Data(m),
            E::Numerical(m) => CliError::Numerical(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
