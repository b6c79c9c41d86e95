use std::path::PathBuf;

use thiserror::Error;
use volstab_core::Error as CoreError;

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const INPUT: u8 = 3;
    pub const NO_DATA: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    ConfigFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("input {path} changed since the manifest was written")]
    DigestMismatch { path: PathBuf },

    #[error("replay of {manifest} produced different {output}")]
    ReplayMismatch { manifest: PathBuf, output: String },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } => exit::CONFIG,
            CliError::DigestMismatch { .. } => exit::INPUT,
            CliError::ReplayMismatch { .. } | CliError::Output { .. } => exit::FAILURE,
            CliError::Core(e) => match e {
                CoreError::InvalidParameter { .. } => exit::CONFIG,
                CoreError::Empty(_) => exit::NO_DATA,
                CoreError::InsufficientData { .. }
                | CoreError::ZeroVariance
                | CoreError::Malformed { .. }
                | CoreError::Format { .. }
                | CoreError::NoOverlap
                | CoreError::Io { .. }
                | CoreError::Csv(_)
                | CoreError::Json(_) => exit::INPUT,
                _ => exit::FAILURE,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
