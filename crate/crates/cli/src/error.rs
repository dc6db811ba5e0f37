use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mb_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 for I/O and unreadable inputs, 2 for configuration, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use mb_core::Error as E;
        match self {
            CliError::Io { .. } | CliError::Input(_) => 1,
            CliError::Core(e) => match e.root() {
                E::Io { .. } | E::Format { .. } => 1,
                E::Config(_) | E::InvalidArgument(_) => 2,
                _ => 3,
            },
        }
    }
}
