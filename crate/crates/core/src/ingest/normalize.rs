//! Mapping of API observation objects onto core records.
//!
//! Recognised fields: `id`, `user.id` (or `user_id`), `time_observed_at` or
//! `observed_on`, `created_at`, `location` ("lat,lon") or
//! `geojson.coordinates` ([lon, lat]), `taxon.id`, `quality_grade`, and
//! nested `identifications` carrying `id`, `user.id`, `created_at`,
//! `taxon.id` and `category`.

use chrono::{NaiveDate, TimeZone, Utc};
use serde_json::Value;

use crate::data::{parse_time, IdentificationRecord, LatLon, ObservationRecord, QualityGrade, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("record has no id")]
    MissingId,
    #[error("record {0} has no user reference")]
    MissingUser(String),
    #[error("record {0} has no observation time")]
    MissingTime(String),
    #[error("record {id}: bad field {field}: {reason}")]
    BadField { id: String, field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub observation: ObservationRecord,
    pub identifications: Vec<IdentificationRecord>,
    /// Nested identifications that could not be mapped.
    pub dropped: Vec<String>,
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn user_of(record: &Value) -> Option<String> {
    record.pointer("/user/id").and_then(id_string).or_else(|| record.get("user_id").and_then(id_string))
}

fn time_field(record: &Value, field: &'static str, id: &str) -> Result<Option<Timestamp>, NormalizeError> {
    match record.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => parse_time(s).map(Some).map_err(|e| NormalizeError::BadField {
            id: id.into(),
            field,
            reason: e.to_string(),
        }),
        Some(other) => {
            Err(NormalizeError::BadField { id: id.into(), field, reason: format!("expected a string, got {other}") })
        }
    }
}

fn location_of(record: &Value, id: &str) -> Result<Option<LatLon>, NormalizeError> {
    let bad = |reason: String| NormalizeError::BadField { id: id.into(), field: "location", reason };
    let (lat, lon) = match (record.get("location"), record.pointer("/geojson/coordinates")) {
        (Some(Value::String(s)), _) => {
            let (a, b) = s.split_once(',').ok_or_else(|| bad(format!("expected \"lat,lon\", got {s:?}")))?;
            let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            (parse(a)?, parse(b)?)
        }
        (_, Some(Value::Array(c))) if c.len() == 2 => match (c[1].as_f64(), c[0].as_f64()) {
            (Some(lat), Some(lon)) => (lat, lon),
            _ => return Err(bad("non-numeric coordinates".into())),
        },
        _ => return Ok(None),
    };
    LatLon::new(lat, lon).map(Some).map_err(|e| bad(e.to_string()))
}

fn agreement(category: Option<&str>) -> Option<bool> {
    match category? {
        "maverick" => Some(false),
        "supporting" | "improving" | "leading" => Some(true),
        _ => None,
    }
}

fn identification(v: &Value, observation_id: &str) -> Result<IdentificationRecord, String> {
    let id = v.get("id").and_then(id_string).ok_or("identification without id")?;
    let user = user_of(v).ok_or_else(|| format!("identification {id} has no user"))?;
    let created = match v.get("created_at").and_then(Value::as_str) {
        Some(s) => parse_time(s).map_err(|e| format!("identification {id}: created_at: {e}"))?,
        None => return Err(format!("identification {id} has no created_at")),
    };
    let taxon =
        v.pointer("/taxon/id").and_then(id_string).ok_or_else(|| format!("identification {id} has no taxon"))?;
    let mut rec = IdentificationRecord::new(id, observation_id, user, created, taxon);
    rec.agrees_with_community = agreement(v.get("category").and_then(Value::as_str));
    Ok(rec)
}

pub fn normalize(record: &Value) -> Result<Normalized, NormalizeError> {
    let id = record.get("id").and_then(id_string).ok_or(NormalizeError::MissingId)?;
    let user = user_of(record).ok_or_else(|| NormalizeError::MissingUser(id.clone()))?;
    let observed_at = match time_field(record, "time_observed_at", &id)? {
        Some(t) => t,
        None => match record.get("observed_on").and_then(Value::as_str) {
            Some(day) => {
                let d = NaiveDate::parse_from_str(day, "%Y-%m-%d").map_err(|e| NormalizeError::BadField {
                    id: id.clone(),
                    field: "observed_on",
                    reason: e.to_string(),
                })?;
                Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight"))
            }
            None => return Err(NormalizeError::MissingTime(id)),
        },
    };
    let mut obs = ObservationRecord::new(id.clone(), user.clone(), observed_at);
    obs.submitted_at = time_field(record, "created_at", &id)?;
    obs.location = location_of(record, &id)?;
    obs.taxon_id = record.pointer("/taxon/id").and_then(id_string);
    obs.quality_grade = match record.get("quality_grade").and_then(Value::as_str) {
        Some(q) => Some(q.parse::<QualityGrade>().map_err(|reason| NormalizeError::BadField {
            id: id.clone(),
            field: "quality_grade",
            reason,
        })?),
        None => None,
    };

    let mut identifications = Vec::new();
    let mut dropped = Vec::new();
    if let Some(list) = record.get("identifications").and_then(Value::as_array) {
        for v in list {
            match identification(v, &id) {
                Ok(r) => identifications.push(r),
                Err(reason) => dropped.push(reason),
            }
        }
    }
    obs.initial_guess_taxon = identifications
        .iter()
        .filter(|i| i.identifier_id == user)
        .min_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)))
        .map(|i| i.taxon_id.clone());
    Ok(Normalized { observation: obs, identifications, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn full_record_with_nested_identifications() {
        let r = json!({
            "id": 101,
            "user": {"id": 7},
            "time_observed_at": "2020-04-25T10:00:00Z",
            "created_at": "2020-04-25T11:00:00Z",
            "location": "37.77,-122.42",
            "taxon": {"id": 48},
            "quality_grade": "research",
            "identifications": [
                {"id": 1, "user": {"id": 7}, "created_at": "2020-04-25T11:00:00Z", "taxon": {"id": 47}, "category": "improving"},
                {"id": 2, "user": {"id": 8}, "created_at": "2020-04-25T12:00:00Z", "taxon": {"id": 48}, "category": "supporting"},
                {"id": 3, "user": {"id": 9}, "created_at": "2020-04-25T13:00:00Z", "taxon": {"id": 99}, "category": "maverick"}
            ]
        });
        let n = normalize(&r).unwrap();
        assert_eq!(n.observation.id, "101");
        assert_eq!(n.observation.observer_id, "7");
        assert_eq!(n.observation.location, Some(LatLon { lat: 37.77, lon: -122.42 }));
        assert_eq!(n.observation.quality_grade, Some(QualityGrade::Research));
        assert_eq!(n.observation.initial_guess_taxon.as_deref(), Some("47"));
        assert_eq!(n.identifications.len(), 3);
        assert_eq!(n.identifications[2].agrees_with_community, Some(false));
        assert_eq!(n.identifications[1].observation_id, "101");
    }

    #[test]
    fn null_coordinates_become_absent() {
        let r = json!({"id": "a", "user_id": "u", "observed_on": "2020-04-25", "location": null, "geojson": null});
        let n = normalize(&r).unwrap();
        assert_eq!(n.observation.location, None);
        assert_eq!(n.observation.taxon_id, None);
        assert_eq!(n.observation.observed_at, Utc.with_ymd_and_hms(2020, 4, 25, 0, 0, 0).unwrap());
    }

    #[test]
    fn geojson_coordinates_are_lon_lat() {
        let r =
            json!({"id": 1, "user": {"id": 2}, "observed_on": "2020-04-25", "geojson": {"coordinates": [-0.1, 51.5]}});
        assert_eq!(normalize(&r).unwrap().observation.location, Some(LatLon { lat: 51.5, lon: -0.1 }));
    }

    #[test]
    fn missing_user_or_id_fails() {
        assert_eq!(
            normalize(&json!({"id": 5, "observed_on": "2020-01-01"})),
            Err(NormalizeError::MissingUser("5".into()))
        );
        assert_eq!(normalize(&json!({"user": {"id": 1}})), Err(NormalizeError::MissingId));
        assert!(matches!(
            normalize(&json!({"id": 5, "user": {"id": 1}, "observed_on": "2020-01-01", "location": "95,0"})),
            Err(NormalizeError::BadField { field: "location", .. })
        ));
    }

    #[test]
    fn broken_identifications_are_dropped_not_fatal() {
        let r = json!({"id": 1, "user": {"id": 2}, "observed_on": "2020-04-25", "identifications": [{"id": 9, "user": {"id": 3}}]});
        let n = normalize(&r).unwrap();
        assert!(n.identifications.is_empty());
        assert_eq!(n.dropped.len(), 1);
    }
}
