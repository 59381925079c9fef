//! Canonical records, the merged in-memory dataset, record files and challenge windows.

mod challenge;
mod dataset;
mod load;
mod quality;
mod records;

use std::path::PathBuf;

pub(crate) use challenge::parse_time;
pub use challenge::{format_challenges, load_challenges, ChallengeKey, ChallengeWindow};
pub use dataset::{merge, Dataset, MergeReport};
pub use load::{
    load_records, write_identifications_csv, write_observations_csv, Fragment, LoadMode, RecordFormat, RowIssue,
};
pub use quality::{derive_quality_grade, RESEARCH_THRESHOLD};
pub use records::{IdentificationRecord, LatLon, ObservationRecord, QualityGrade, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: malformed row: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("unknown record format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid challenge window: {0}")]
    InvalidWindow(String),
    #[error("challenge {0} configured more than once")]
    DuplicateChallenge(ChallengeKey),
    #[error("{path}:{line}: {reason}")]
    Config { path: PathBuf, line: usize, reason: String },
    #[error("identification {identification_id} does not target observation {observation_id}")]
    ForeignIdentification { identification_id: String, observation_id: String },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Csv(e.to_string())
    }
}
