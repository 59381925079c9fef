//! JSONL and CSV record files.
//!
//! JSONL carries both record kinds, discriminated by a `"type"` key. CSV holds
//! one record kind per file; identification files are recognised by an
//! `observation_id` header column.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::records::{IdentificationRecord, LatLon, ObservationRecord, QualityGrade, Timestamp};
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl FromStr for RecordFormat {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(RecordFormat::Jsonl),
            "csv" => Ok(RecordFormat::Csv),
            _ => Err(DataError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for RecordFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordFormat::Jsonl => "jsonl",
            RecordFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadMode {
    #[default]
    Strict,
    Lenient,
}

impl FromStr for LoadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(LoadMode::Strict),
            "lenient" => Ok(LoadMode::Lenient),
            other => Err(format!("unknown load mode {other:?}")),
        }
    }
}

/// A row that lenient loading skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: usize,
    pub reason: String,
}

/// Records parsed from one source, before merging.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fragment {
    pub observations: Vec<ObservationRecord>,
    pub identifications: Vec<IdentificationRecord>,
    pub skipped: Vec<RowIssue>,
}

impl Fragment {
    pub fn len(&self) -> usize {
        self.observations.len() + self.identifications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Serializes the records in the JSONL schema, observations first.
    pub fn write_jsonl<W: Write>(&self, out: W) -> io::Result<()> {
        write_jsonl(out, &self.observations, &self.identifications)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum WireRecord {
    Observation(WireObservation),
    Identification(WireIdentification),
}

#[derive(Debug, Serialize, Deserialize)]
struct WireObservation {
    id: String,
    user_id: String,
    observed_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    submitted_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    taxon_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_guess_taxon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quality_grade: Option<QualityGrade>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireIdentification {
    id: String,
    observation_id: String,
    user_id: String,
    created_at: Timestamp,
    taxon_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agrees_with_community: Option<bool>,
}

impl TryFrom<WireObservation> for ObservationRecord {
    type Error = String;

    fn try_from(w: WireObservation) -> Result<Self, String> {
        if w.id.is_empty() {
            return Err("empty observation id".into());
        }
        if w.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        let location = match (w.lat, w.lon) {
            (Some(lat), Some(lon)) => Some(LatLon::new(lat, lon).map_err(|e| e.to_string())?),
            (None, None) => None,
            _ => return Err("lat and lon must both be present or both absent".into()),
        };
        Ok(ObservationRecord {
            id: w.id,
            observer_id: w.user_id,
            observed_at: w.observed_at,
            submitted_at: w.submitted_at,
            location,
            taxon_id: w.taxon_id.filter(|t| !t.is_empty()),
            initial_guess_taxon: w.initial_guess_taxon.filter(|t| !t.is_empty()),
            quality_grade: w.quality_grade,
        })
    }
}

impl TryFrom<WireIdentification> for IdentificationRecord {
    type Error = String;

    fn try_from(w: WireIdentification) -> Result<Self, String> {
        if w.id.is_empty() || w.observation_id.is_empty() || w.user_id.is_empty() {
            return Err("identification requires id, observation_id and user_id".into());
        }
        Ok(IdentificationRecord {
            id: w.id,
            observation_id: w.observation_id,
            identifier_id: w.user_id,
            created_at: w.created_at,
            taxon_id: w.taxon_id,
            agrees_with_community: w.agrees_with_community,
        })
    }
}

fn wire_observation(o: &ObservationRecord) -> WireObservation {
    WireObservation {
        id: o.id.clone(),
        user_id: o.observer_id.clone(),
        observed_at: o.observed_at,
        submitted_at: o.submitted_at,
        lat: o.location.map(|l| l.lat),
        lon: o.location.map(|l| l.lon),
        taxon_id: o.taxon_id.clone(),
        initial_guess_taxon: o.initial_guess_taxon.clone(),
        quality_grade: o.quality_grade,
    }
}

fn wire_identification(i: &IdentificationRecord) -> WireIdentification {
    WireIdentification {
        id: i.id.clone(),
        observation_id: i.observation_id.clone(),
        user_id: i.identifier_id.clone(),
        created_at: i.created_at,
        taxon_id: i.taxon_id.clone(),
        agrees_with_community: i.agrees_with_community,
    }
}

pub(crate) fn write_jsonl<W: Write>(
    mut out: W,
    observations: &[ObservationRecord],
    identifications: &[IdentificationRecord],
) -> io::Result<()> {
    for o in observations {
        serde_json::to_writer(&mut out, &WireRecord::Observation(wire_observation(o)))?;
        out.write_all(b"\n")?;
    }
    for i in identifications {
        serde_json::to_writer(&mut out, &WireRecord::Identification(wire_identification(i)))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Serializes observations in the CSV schema.
pub fn write_observations_csv<W: Write>(out: W, observations: &[ObservationRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_OBSERVATION_HEADER)?;
    for o in observations {
        let wire = wire_observation(o);
        w.write_record([
            wire.id,
            wire.user_id,
            wire.observed_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            wire.submitted_at.map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)).unwrap_or_default(),
            wire.lat.map(|v| v.to_string()).unwrap_or_default(),
            wire.lon.map(|v| v.to_string()).unwrap_or_default(),
            wire.taxon_id.unwrap_or_default(),
            wire.initial_guess_taxon.unwrap_or_default(),
            wire.quality_grade.map(|q| q.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.to_string()))
}

/// Serializes identifications in the CSV schema.
pub fn write_identifications_csv<W: Write>(out: W, identifications: &[IdentificationRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_IDENTIFICATION_HEADER)?;
    for i in identifications {
        w.write_record([
            i.id.clone(),
            i.observation_id.clone(),
            i.identifier_id.clone(),
            i.created_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            i.taxon_id.clone(),
            i.agrees_with_community.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.to_string()))
}

const CSV_OBSERVATION_HEADER: [&str; 9] =
    ["id", "user_id", "observed_at", "submitted_at", "lat", "lon", "taxon_id", "initial_guess_taxon", "quality_grade"];

const CSV_IDENTIFICATION_HEADER: [&str; 6] =
    ["id", "observation_id", "user_id", "created_at", "taxon_id", "agrees_with_community"];

/// Parses one record file.
pub fn load_records(path: &Path, format: RecordFormat, mode: LoadMode) -> Result<Fragment, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    match format {
        RecordFormat::Jsonl => read_jsonl(BufReader::new(file), path, mode),
        RecordFormat::Csv => read_csv(file, path, mode),
    }
}

pub(crate) fn read_jsonl<R: BufRead>(reader: R, path: &Path, mode: LoadMode) -> Result<Fragment, DataError> {
    let mut fragment = Fragment::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<WireRecord>(&line).map_err(|e| e.to_string()).and_then(|wire| match wire {
            WireRecord::Observation(o) => ObservationRecord::try_from(o).map(Parsed::Observation),
            WireRecord::Identification(i) => IdentificationRecord::try_from(i).map(Parsed::Identification),
        });
        fragment.accept(parsed, line_no, path, mode)?;
    }
    Ok(fragment)
}

enum Parsed {
    Observation(ObservationRecord),
    Identification(IdentificationRecord),
}

impl Fragment {
    fn accept(
        &mut self,
        parsed: Result<Parsed, String>,
        line: usize,
        path: &Path,
        mode: LoadMode,
    ) -> Result<(), DataError> {
        match parsed {
            Ok(Parsed::Observation(o)) => self.observations.push(o),
            Ok(Parsed::Identification(i)) => self.identifications.push(i),
            Err(reason) => match mode {
                LoadMode::Strict => {
                    return Err(DataError::Malformed { path: path.to_path_buf(), line, reason });
                }
                LoadMode::Lenient => self.skipped.push(RowIssue { line, reason }),
            },
        }
        Ok(())
    }
}

fn read_csv<R: Read>(reader: R, path: &Path, mode: LoadMode) -> Result<Fragment, DataError> {
    let mut fragment = Fragment::default();
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if is_empty_input(&e) => return Ok(fragment),
        Err(e) => return Err(malformed(path, 1, e.to_string())),
    };
    if headers.is_empty() {
        return Ok(fragment);
    }
    let identifications = headers.iter().any(|h| h == "observation_id");
    for (idx, row) in rdr.records().enumerate() {
        // header is line 1
        let line = idx + 2;
        let parsed = match row {
            Err(e) => Err(e.to_string()),
            Ok(record) if identifications => record
                .deserialize::<WireIdentification>(Some(&headers))
                .map_err(|e| e.to_string())
                .and_then(IdentificationRecord::try_from)
                .map(Parsed::Identification),
            Ok(record) => record
                .deserialize::<CsvObservation>(Some(&headers))
                .map_err(|e| e.to_string())
                .and_then(CsvObservation::into_wire)
                .and_then(ObservationRecord::try_from)
                .map(Parsed::Observation),
        };
        fragment.accept(parsed, line, path, mode)?;
    }
    Ok(fragment)
}

fn is_empty_input(e: &csv::Error) -> bool {
    matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof)
}

fn malformed(path: &Path, line: usize, reason: String) -> DataError {
    DataError::Malformed { path: PathBuf::from(path), line, reason }
}

// CSV cannot distinguish an empty cell from a missing value, so optional
// columns are read as strings and blank cells become `None`.
#[derive(Debug, Deserialize)]
struct CsvObservation {
    id: String,
    user_id: String,
    observed_at: Timestamp,
    #[serde(default)]
    submitted_at: Option<String>,
    #[serde(default)]
    lat: Option<String>,
    #[serde(default)]
    lon: Option<String>,
    #[serde(default)]
    taxon_id: Option<String>,
    #[serde(default)]
    initial_guess_taxon: Option<String>,
    #[serde(default)]
    quality_grade: Option<String>,
}

impl CsvObservation {
    fn into_wire(self) -> Result<WireObservation, String> {
        fn blank(v: Option<String>) -> Option<String> {
            v.filter(|s| !s.trim().is_empty())
        }
        let number = |v: Option<String>, name: &str| -> Result<Option<f64>, String> {
            blank(v).map(|s| s.trim().parse::<f64>().map_err(|e| format!("{name}: {e}"))).transpose()
        };
        Ok(WireObservation {
            id: self.id,
            user_id: self.user_id,
            observed_at: self.observed_at,
            submitted_at: blank(self.submitted_at)
                .map(|s| {
                    chrono::DateTime::parse_from_rfc3339(s.trim())
                        .map(|t| t.with_timezone(&chrono::Utc))
                        .map_err(|e| format!("submitted_at: {e}"))
                })
                .transpose()?,
            lat: number(self.lat, "lat")?,
            lon: number(self.lon, "lon")?,
            taxon_id: blank(self.taxon_id),
            initial_guess_taxon: blank(self.initial_guess_taxon),
            quality_grade: blank(self.quality_grade).map(|s| s.parse()).transpose()?,
        })
    }
}
