use std::fmt;
use std::fs;
use std::path::Path;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use super::records::{ObservationRecord, Timestamp};
use super::DataError;
use crate::geo::{self, Polygon};

/// Identifies one challenge: a city in a given year.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChallengeKey {
    pub city: String,
    pub year: i32,
}

impl ChallengeKey {
    pub fn new(city: impl Into<String>, year: i32) -> Self {
        Self { city: city.into(), year }
    }
}

impl fmt::Display for ChallengeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.city, self.year)
    }
}

/// The time span (and optionally the boundary) of one challenge.
///
/// Membership is half-open: `start <= t < end`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeWindow {
    pub city: String,
    pub year: i32,
    pub start: Timestamp,
    pub end: Timestamp,
    pub region: Option<Polygon>,
}

impl ChallengeWindow {
    pub fn new(city: impl Into<String>, year: i32, start: Timestamp, end: Timestamp) -> Result<Self, DataError> {
        let city = city.into();
        if end <= start {
            return Err(DataError::InvalidWindow(format!("{city}/{year}: end {end} is not after start {start}")));
        }
        Ok(Self { city, year, start, end, region: None })
    }

    pub fn with_region(mut self, region: Polygon) -> Self {
        self.region = Some(region);
        self
    }

    pub fn key(&self) -> ChallengeKey {
        ChallengeKey::new(self.city.clone(), self.year)
    }

    pub fn contains_time(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    /// Time membership plus, when a region is set, location inside it.
    /// Observations without a location never fall inside a regional window.
    pub fn contains(&self, obs: &ObservationRecord) -> bool {
        if !self.contains_time(obs.observed_at) {
            return false;
        }
        match (&self.region, obs.location) {
            (None, _) => true,
            (Some(region), Some(loc)) => region.contains(loc),
            (Some(_), None) => false,
        }
    }
}

/// Reads a challenge listing.
///
/// One window per line: `city,year,start,end[,region.geojson]`, timestamps in
/// RFC 3339. Blank lines and lines starting with `#` are ignored. Region paths
/// are resolved relative to the listing's directory.
pub fn load_challenges(path: &Path) -> Result<Vec<ChallengeWindow>, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut windows: Vec<ChallengeWindow> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| DataError::Config { path: path.to_path_buf(), line: idx + 1, reason };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(err(format!("expected 4 or 5 comma-separated fields, found {}", fields.len())));
        }
        let year: i32 = fields[1].parse().map_err(|e| err(format!("year: {e}")))?;
        let start = parse_time(fields[2]).map_err(|e| err(format!("start: {e}")))?;
        let end = parse_time(fields[3]).map_err(|e| err(format!("end: {e}")))?;
        let mut window = ChallengeWindow::new(fields[0], year, start, end).map_err(|e| err(e.to_string()))?;
        if let Some(region) = fields.get(4).filter(|r| !r.is_empty()) {
            let region = geo::load_region(&base.join(region)).map_err(|e| err(e.to_string()))?;
            window = window.with_region(region);
        }
        if windows.iter().any(|w| w.city == window.city && w.year == window.year) {
            return Err(DataError::DuplicateChallenge(window.key()));
        }
        windows.push(window);
    }
    Ok(windows)
}

/// Renders windows back into the listing format (regions are not written).
pub fn format_challenges(windows: &[ChallengeWindow]) -> String {
    let mut out = String::from("# city,year,start,end[,region]\n");
    for w in windows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            w.city,
            w.year,
            w.start.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            w.end.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
        ));
    }
    out
}

pub(crate) fn parse_time(s: &str) -> Result<Timestamp, chrono::ParseError> {
    DateTime::parse_from_rfc3339(s).map(|t| t.with_timezone(&chrono::Utc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn rejects_empty_or_inverted_window() {
        let t = parse_time("2020-04-24T00:00:00Z").unwrap();
        assert!(ChallengeWindow::new("x", 2020, t, t).is_err());
    }

    #[test]
    fn half_open_membership() {
        let s = parse_time("2020-04-24T00:00:00Z").unwrap();
        let e = parse_time("2020-04-28T00:00:00Z").unwrap();
        let w = ChallengeWindow::new("x", 2020, s, e).unwrap();
        assert!(w.contains_time(s));
        assert!(!w.contains_time(e));
    }

    #[test]
    fn listing_round_trip_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "# comment").unwrap();
        writeln!(f, "London, 2019, 2019-04-26T00:00:00Z, 2019-04-30T00:00:00Z").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "London,2020,2020-04-24T00:00:00+01:00,2020-04-28T00:00:00+01:00").unwrap();
        drop(f);
        let windows = load_challenges(&path).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[1].start, parse_time("2020-04-23T23:00:00Z").unwrap());
        fs::write(&path, format_challenges(&windows)).unwrap();
        assert_eq!(load_challenges(&path).unwrap(), windows);

        fs::write(
            &path,
            "A,2020,2020-04-24T00:00:00Z,2020-04-28T00:00:00Z\nA,2020,2020-04-24T00:00:00Z,2020-04-29T00:00:00Z\n",
        )
        .unwrap();
        assert!(matches!(load_challenges(&path), Err(DataError::DuplicateChallenge(_))));
    }
}
