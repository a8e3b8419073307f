use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::telemetry::AreaLabel;

/// Errors raised by the telemetry, classification, scoring and storage layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("line {line}: field `{field}` out of range: {value}")]
    OutOfRange {
        line: u64,
        field: &'static str,
        value: f64,
    },

    #[error("line {line}: timestamp {t} does not follow previous timestamp {prev}")]
    NonMonotonic { line: u64, t: i64, prev: i64 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid feature configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("empty synthetic profile")]
    EmptyProfile,

    #[error("no features: every segment is shorter than the {buffer} s buffer")]
    NoFeatures { buffer: u32 },

    #[error("empty feature set")]
    EmptyFeatures,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training data has no samples tagged {0}")]
    MissingClass(AreaLabel),

    #[error("class {label} has {count} pattern(s); leave-one-out needs at least 2")]
    TooFewPatterns { label: AreaLabel, count: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("sample {index} has no classified neighbour in its segment")]
    Unlabeled { index: usize },

    #[error("{0}: no telemetry rows")]
    EmptyLog(String),

    #[error("empty trip")]
    EmptyTrip,

    #[error("score undefined for a route with zero total time")]
    ZeroDuration,

    #[error("need at least 2 candidate routes, got {0}")]
    TooFewCandidates(usize),

    #[error("no known route between the given endpoints")]
    NoKnownRoute,

    #[error("route `{0}` not found")]
    RouteNotFound(String),

    #[error("route id `{0}` already stored with different content")]
    IdCollision(String),

    #[error("inconsistent route record: {0}")]
    InconsistentRecord(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
