use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("firing rate {rate} Hz outside the open interval (0, {r_max}) Hz")]
    RateOutOfDomain { rate: f64, r_max: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("time step {dt} s outside (0, {max}] s")]
    UnstableTimeStep { dt: f64, max: f64 },

    #[error("population vector magnitude {magnitude:.4} below threshold {threshold:.4}; activity has no direction")]
    DegenerateProfile { magnitude: f64, threshold: f64 },

    #[error("kernel invariant violated: {0}")]
    KernelInvariant(String),

    #[error("linear fit rejected: {0}")]
    FitFailure(String),

    #[error("calibration belongs to kernel {expected}, but the loaded kernel hashes to {actual}")]
    CalibrationMismatch { expected: String, actual: String },

    #[error("timestamps not strictly increasing at {location}")]
    NonMonotonic { location: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Structure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data or model.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
