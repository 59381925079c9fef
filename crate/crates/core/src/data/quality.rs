use std::collections::BTreeSet;

use super::records::{IdentificationRecord, ObservationRecord, QualityGrade};
use super::DataError;

/// Research grade needs strictly more independent identifiers than this.
pub const RESEARCH_THRESHOLD: usize = 2;

/// Grades an observation from its identifications.
///
/// An identification is independent when its author is not the observer;
/// several identifications by one user count once.
pub fn derive_quality_grade<'a, I>(
    observation: &ObservationRecord,
    identifications: I,
) -> Result<QualityGrade, DataError>
where
    I: IntoIterator<Item = &'a IdentificationRecord>,
{
    let mut identifiers = BTreeSet::new();
    for ident in identifications {
        if ident.observation_id != observation.id {
            return Err(DataError::ForeignIdentification {
                identification_id: ident.id.clone(),
                observation_id: observation.id.clone(),
            });
        }
        if ident.identifier_id != observation.observer_id {
            identifiers.insert(ident.identifier_id.as_str());
        }
    }
    Ok(match identifiers.len() {
        0 => QualityGrade::Casual,
        n if n > RESEARCH_THRESHOLD => QualityGrade::Research,
        _ => QualityGrade::NeedsId,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn obs() -> ObservationRecord {
        ObservationRecord::new("o1", "alice", chrono::Utc.with_ymd_and_hms(2020, 4, 24, 0, 0, 0).unwrap())
    }

    fn ident(id: &str, user: &str) -> IdentificationRecord {
        IdentificationRecord::new(id, "o1", user, chrono::Utc.with_ymd_and_hms(2020, 4, 25, 0, 0, 0).unwrap(), "t")
    }

    #[test]
    fn three_distinct_identifiers_reach_research() {
        let ids = [ident("1", "b"), ident("2", "c"), ident("3", "d")];
        assert_eq!(derive_quality_grade(&obs(), &ids).unwrap(), QualityGrade::Research);
    }

    #[test]
    fn no_identifications_is_casual() {
        assert_eq!(derive_quality_grade(&obs(), &[]).unwrap(), QualityGrade::Casual);
    }

    #[test]
    fn observer_self_identifications_do_not_count() {
        let ids = [ident("1", "alice"), ident("2", "alice"), ident("3", "alice")];
        assert_eq!(derive_quality_grade(&obs(), &ids).unwrap(), QualityGrade::Casual);
    }

    #[test]
    fn repeat_identifier_counts_once() {
        let ids = [ident("1", "b"), ident("2", "b"), ident("3", "c")];
        assert_eq!(derive_quality_grade(&obs(), &ids).unwrap(), QualityGrade::NeedsId);
    }

    #[test]
    fn foreign_identification_is_an_error() {
        let mut other = ident("1", "b");
        other.observation_id = "o2".into();
        assert!(matches!(derive_quality_grade(&obs(), &[other]), Err(DataError::ForeignIdentification { .. })));
    }
}
