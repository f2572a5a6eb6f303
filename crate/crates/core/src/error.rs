use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across data loading, statistic evaluation and the bootstrap.
#[derive(Debug, Error)]
pub enum AnovaError {
    #[error("malformed data: {0}")]
    MalformedData(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bandwidth error: {0}")]
    BandwidthError(String),

    #[error("no admissible (B, B1) pair in the candidate grid")]
    NoAdmissibleBandwidth,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("replicate {replicate} failed: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<AnovaError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AnovaError>;

impl AnovaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AnovaError::Io {
            path: path.into(),
            source,
        }
    }
}
