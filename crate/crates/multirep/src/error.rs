use std::io;
use std::path::PathBuf;

use multirep_core::Error as CoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const RUNTIME: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => exit::USAGE,
            Error::Parse { .. } | Error::Format { .. } => exit::DATA,
            Error::Io { .. } | Error::Runtime(_) => exit::RUNTIME,
            Error::Core(e) => match e {
                CoreError::InvalidOrder(_)
                | CoreError::DuplicateKind(_)
                | CoreError::EmptyKinds
                | CoreError::UnknownKind(_)
                | CoreError::EvenKernel(_)
                | CoreError::InvalidDropout(_)
                | CoreError::InvalidConfig(_)
                | CoreError::UnsupportedCd { .. } => exit::USAGE,
                CoreError::NonFiniteLoss { .. } => exit::RUNTIME,
                _ => exit::DATA,
            },
        }
    }
}
