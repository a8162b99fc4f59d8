use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("forward cache does not match the network it is used with")]
    StaleCache,

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("svdd center has not been initialized")]
    CenterUninitialized,

    #[error("svdd center is already initialized and frozen")]
    CenterFrozen,

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 8], found: [u8; 8] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },

    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),

    #[error("calibration scores are not sorted at index {0}")]
    UnsortedCalibration(usize),

    #[error("scorer fingerprint mismatch: calibration {calibration}, scorer {scorer}")]
    FingerprintMismatch { calibration: String, scorer: String },

    #[error("unknown code {code} for {what}")]
    UnknownCode { what: &'static str, code: u8 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Stable numeric code for each error kind, used by the CLI and tests.
    pub fn code(&self) -> u16 {
        match self {
            Error::DimensionMismatch { .. } => 10,
            Error::StaleCache => 11,
            Error::NonFiniteGradient(_) => 12,
            Error::NonFinite(_) => 13,
            Error::Diverged { .. } => 14,
            Error::InvalidArgument(_) => 15,
            Error::InvalidModel(_) => 16,
            Error::ArchitectureMismatch(_) => 17,
            Error::CenterUninitialized => 18,
            Error::CenterFrozen => 19,
            Error::EmptyCalibration => 20,
            Error::BadMagic { .. } => 30,
            Error::VersionMismatch { .. } => 31,
            Error::Truncated { .. } => 32,
            Error::TrailingBytes(_) => 33,
            Error::UnsortedCalibration(_) => 34,
            Error::FingerprintMismatch { .. } => 35,
            Error::UnknownCode { .. } => 36,
            Error::Config { .. } => 37,
            Error::Io { .. } => 40,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
