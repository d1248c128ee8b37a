use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const TOLERANCE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: checkpoint format version {found} is not supported (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error(transparent)]
    Core(#[from] diner_core::Error),

    #[error("PSNR gap {gap_db:.6} dB is not below the tolerance of {tolerance_db} dB")]
    Tolerance { gap_db: f64, tolerance_db: f64 },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use diner_core::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Format { .. } | CliError::Version { .. } => exit::IO,
            CliError::Core(
                E::Config(_)
                | E::Shape(_)
                | E::Size(_)
                | E::EmptyInput
                | E::Index { .. }
                | E::SamplingViolation { .. },
            ) => exit::USAGE,
            CliError::Core(_) => exit::NUMERIC,
            CliError::Tolerance { .. } => exit::TOLERANCE,
        }
    }
}
