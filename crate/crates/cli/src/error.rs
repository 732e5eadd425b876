use std::path::{Path, PathBuf};

use lbnet_core::error::{CurationError, ErrorKind, EvalError, FemError, MeshError, NnError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] lbnet_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => EXIT_INPUT,
                ErrorKind::Numerical => EXIT_NUMERICAL,
                ErrorKind::Io => EXIT_IO,
            },
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "cli.usage",
            CliError::Input(_) => "cli.input",
            CliError::Io { .. } => "cli.io",
            CliError::Core(e) => e.code(),
        }
    }
}

macro_rules! from_module {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

from_module!(MeshError, FemError, NnError, CurationError, EvalError, lbnet_core::error::FeatureError);
