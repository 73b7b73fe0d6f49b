use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the transceiver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no LR-FHSS profile for region {region} DR{dr_id}")]
    NotFound { region: String, dr_id: u8 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("payload length {len} outside 1..={max}")]
    InvalidPayloadLength { len: usize, max: usize },

    #[error("invalid length: expected {expected}, got {actual}")]
    InvalidLength { expected: String, actual: usize },

    #[error("invalid PHDR field: {0}")]
    InvalidPhdr(String),

    #[error("hopping plan of {requested} blocks exceeds cap of {cap}")]
    PlanTooLong { requested: usize, cap: usize },

    #[error("channel index {index} outside the {n_channels}-channel band")]
    PlanOutOfBand { index: u32, n_channels: u32 },

    #[error("signal truncated: need {needed} samples, have {available}")]
    Truncated { needed: usize, available: usize },

    #[error("unsupported sample rate {rate_hz} Hz: {reason}")]
    UnsupportedRate { rate_hz: f64, reason: &'static str },

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    RateMismatch { expected: f64, actual: f64 },

    #[error("requested frames {start}..{end} are not held by the block store (holds {held_start}..{held_end})")]
    Evicted {
        start: u64,
        end: u64,
        held_start: u64,
        held_end: u64,
    },

    #[error("CRC check failed")]
    CrcFail,

    #[error("missing payload fragment {index}")]
    MissingFragments { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

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

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
