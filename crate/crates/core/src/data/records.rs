use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::DataError;

pub type Timestamp = DateTime<Utc>;

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self, DataError> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(DataError::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityGrade {
    Casual,
    NeedsId,
    Research,
}

impl QualityGrade {
    pub fn as_str(self) -> &'static str {
        match self {
            QualityGrade::Casual => "casual",
            QualityGrade::NeedsId => "needs_id",
            QualityGrade::Research => "research",
        }
    }
}

impl fmt::Display for QualityGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualityGrade {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "casual" => Ok(QualityGrade::Casual),
            "needs_id" => Ok(QualityGrade::NeedsId),
            "research" => Ok(QualityGrade::Research),
            other => Err(format!("unknown quality grade {other:?}")),
        }
    }
}

/// One uploaded observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub id: String,
    pub observer_id: String,
    pub observed_at: Timestamp,
    pub submitted_at: Option<Timestamp>,
    pub location: Option<LatLon>,
    pub taxon_id: Option<String>,
    pub initial_guess_taxon: Option<String>,
    pub quality_grade: Option<QualityGrade>,
}

impl ObservationRecord {
    /// Minimal record with only the mandatory fields set.
    pub fn new(id: impl Into<String>, observer_id: impl Into<String>, observed_at: Timestamp) -> Self {
        Self {
            id: id.into(),
            observer_id: observer_id.into(),
            observed_at,
            submitted_at: None,
            location: None,
            taxon_id: None,
            initial_guess_taxon: None,
            quality_grade: None,
        }
    }

    pub fn with_location(mut self, location: LatLon) -> Self {
        self.location = Some(location);
        self
    }

    pub fn with_taxon(mut self, taxon_id: impl Into<String>) -> Self {
        self.taxon_id = Some(taxon_id.into());
        self
    }
}

/// A species determination one user attached to an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationRecord {
    pub id: String,
    pub observation_id: String,
    pub identifier_id: String,
    pub created_at: Timestamp,
    pub taxon_id: String,
    pub agrees_with_community: Option<bool>,
}

impl IdentificationRecord {
    pub fn new(
        id: impl Into<String>,
        observation_id: impl Into<String>,
        identifier_id: impl Into<String>,
        created_at: Timestamp,
        taxon_id: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            observation_id: observation_id.into(),
            identifier_id: identifier_id.into(),
            created_at,
            taxon_id: taxon_id.into(),
            agrees_with_community: None,
        }
    }
}
