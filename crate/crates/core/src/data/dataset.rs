use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, Write};

use super::challenge::{ChallengeKey, ChallengeWindow};
use super::load::{write_jsonl, Fragment};
use super::records::{IdentificationRecord, ObservationRecord};
use super::DataError;

/// What merging dropped or set aside.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeReport {
    pub duplicate_observations: usize,
    pub duplicate_identifications: usize,
    pub orphaned: usize,
    pub skipped_rows: usize,
}

/// The immutable, merged record set that every analysis reads.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    observations: Vec<ObservationRecord>,
    identifications: Vec<IdentificationRecord>,
    orphan_identifications: Vec<IdentificationRecord>,
    challenges: Vec<ChallengeWindow>,
    obs_index: HashMap<String, usize>,
    report: MergeReport,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.observations == other.observations
            && self.identifications == other.identifications
            && self.orphan_identifications == other.orphan_identifications
            && self.challenges == other.challenges
    }
}

/// Unions fragments in order. The first occurrence of an id wins; identifications
/// whose observation is unknown are moved to the orphan list.
pub fn merge(fragments: &[Fragment]) -> Dataset {
    let mut report = MergeReport::default();
    let mut observations = Vec::new();
    let mut obs_index = HashMap::new();
    for frag in fragments {
        report.skipped_rows += frag.skipped.len();
        for o in &frag.observations {
            if obs_index.contains_key(&o.id) {
                report.duplicate_observations += 1;
                continue;
            }
            obs_index.insert(o.id.clone(), observations.len());
            observations.push(o.clone());
        }
    }
    let mut seen = HashSet::new();
    let mut identifications = Vec::new();
    let mut orphan_identifications = Vec::new();
    for frag in fragments {
        for i in &frag.identifications {
            if !seen.insert(i.id.clone()) {
                report.duplicate_identifications += 1;
                continue;
            }
            if obs_index.contains_key(&i.observation_id) {
                identifications.push(i.clone());
            } else {
                orphan_identifications.push(i.clone());
            }
        }
    }
    report.orphaned = orphan_identifications.len();
    Dataset { observations, identifications, orphan_identifications, challenges: Vec::new(), obs_index, report }
}

impl Dataset {
    /// Builds a dataset from loose records, applying the merge rules.
    pub fn from_records(
        observations: Vec<ObservationRecord>,
        identifications: Vec<IdentificationRecord>,
        challenges: Vec<ChallengeWindow>,
    ) -> Result<Self, DataError> {
        merge(&[Fragment { observations, identifications, skipped: Vec::new() }]).with_challenges(challenges)
    }

    /// Attaches challenge windows; `(city, year)` must be unique.
    pub fn with_challenges(mut self, challenges: Vec<ChallengeWindow>) -> Result<Self, DataError> {
        let mut keys = HashSet::new();
        for w in &challenges {
            if w.end <= w.start {
                return Err(DataError::InvalidWindow(w.key().to_string()));
            }
            if !keys.insert(w.key()) {
                return Err(DataError::DuplicateChallenge(w.key()));
            }
        }
        self.challenges = challenges;
        Ok(self)
    }

    pub fn observations(&self) -> &[ObservationRecord] {
        &self.observations
    }

    pub fn identifications(&self) -> &[IdentificationRecord] {
        &self.identifications
    }

    pub fn orphan_identifications(&self) -> &[IdentificationRecord] {
        &self.orphan_identifications
    }

    pub fn challenges(&self) -> &[ChallengeWindow] {
        &self.challenges
    }

    pub fn merge_report(&self) -> &MergeReport {
        &self.report
    }

    pub fn observation(&self, id: &str) -> Option<&ObservationRecord> {
        self.obs_index.get(id).map(|&i| &self.observations[i])
    }

    /// Looks up a configured window by city and year.
    pub fn challenge(&self, key: &ChallengeKey) -> Option<&ChallengeWindow> {
        self.challenges.iter().find(|w| w.city == key.city && w.year == key.year)
    }

    /// Challenges ordered by `(city, year)`.
    pub fn sorted_challenges(&self) -> Vec<&ChallengeWindow> {
        let mut v: Vec<_> = self.challenges.iter().collect();
        v.sort_by_key(|w| w.key());
        v
    }

    /// Identifications grouped by target observation id.
    pub fn identifications_by_observation(&self) -> HashMap<&str, Vec<&IdentificationRecord>> {
        let mut map: HashMap<&str, Vec<&IdentificationRecord>> = HashMap::new();
        for i in &self.identifications {
            map.entry(i.observation_id.as_str()).or_default().push(i);
        }
        map
    }

    /// Pairs each resolvable identification with the observation it targets.
    pub fn identified_pairs(&self) -> impl Iterator<Item = (&ObservationRecord, &IdentificationRecord)> {
        self.identifications.iter().map(move |i| (&self.observations[self.obs_index[&i.observation_id]], i))
    }

    /// Observations inside the window (time and, if set, region), plus every
    /// identification that targets one of them regardless of its own timestamp.
    pub fn filter_by_challenge(&self, window: &ChallengeWindow) -> Dataset {
        let observations: Vec<ObservationRecord> =
            self.observations.iter().filter(|o| window.contains(o)).cloned().collect();
        let obs_index: HashMap<String, usize> =
            observations.iter().enumerate().map(|(i, o)| (o.id.clone(), i)).collect();
        let identifications =
            self.identifications.iter().filter(|i| obs_index.contains_key(&i.observation_id)).cloned().collect();
        Dataset {
            observations,
            identifications,
            orphan_identifications: Vec::new(),
            challenges: self.challenges.clone(),
            obs_index,
            report: MergeReport::default(),
        }
    }

    /// Writes observations, identifications and orphans as JSONL.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_jsonl(&mut out, &self.observations, &self.identifications)?;
        write_jsonl(&mut out, &[], &self.orphan_identifications)
    }

    /// Re-checks every structural invariant and lists what is broken.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut ids = HashSet::new();
        for o in &self.observations {
            if !ids.insert(o.id.as_str()) {
                problems.push(format!("duplicate observation id {}", o.id));
            }
            if let Some(loc) = o.location {
                if !(-90.0..=90.0).contains(&loc.lat) || !(-180.0..=180.0).contains(&loc.lon) {
                    problems.push(format!("observation {} has out-of-range location", o.id));
                }
            }
        }
        let mut ident_ids = HashSet::new();
        for i in self.identifications.iter().chain(&self.orphan_identifications) {
            if !ident_ids.insert(i.id.as_str()) {
                problems.push(format!("duplicate identification id {}", i.id));
            }
        }
        for i in &self.identifications {
            if !self.obs_index.contains_key(&i.observation_id) {
                problems.push(format!("identification {} targets unknown observation {}", i.id, i.observation_id));
            }
        }
        let mut keys = BTreeMap::new();
        for w in &self.challenges {
            if w.end <= w.start {
                problems.push(format!("challenge {} ends before it starts", w.key()));
            }
            *keys.entry(w.key()).or_insert(0) += 1;
        }
        for (k, n) in keys {
            if n > 1 {
                problems.push(format!("challenge {k} configured {n} times"));
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LatLon;
    use chrono::{Duration, TimeZone, Utc};
    use proptest::prelude::*;

    fn t0() -> chrono::DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 4, 24, 0, 0, 0).unwrap()
    }

    fn obs(id: &str, user: &str, hours: i64) -> ObservationRecord {
        ObservationRecord::new(id, user, t0() + Duration::hours(hours))
    }

    fn ident(id: &str, obs: &str, user: &str, hours: i64) -> IdentificationRecord {
        IdentificationRecord::new(id, obs, user, t0() + Duration::hours(hours), "t")
    }

    fn frag(o: Vec<ObservationRecord>, i: Vec<IdentificationRecord>) -> Fragment {
        Fragment { observations: o, identifications: i, skipped: vec![] }
    }

    #[test]
    fn merge_with_itself_is_identity() {
        let f = frag(vec![obs("o1", "a", 0), obs("o2", "b", 1)], vec![ident("i1", "o1", "b", 2)]);
        assert_eq!(merge(&[f.clone(), f.clone()]), merge(&[f]));
    }

    #[test]
    fn unresolved_identification_becomes_orphan() {
        let d = merge(&[frag(vec![obs("o1", "a", 0)], vec![ident("i1", "missing", "b", 2)])]);
        assert_eq!(d.orphan_identifications().len(), 1);
        assert!(d.identifications().is_empty());
        assert_eq!(d.merge_report().orphaned, 1);
    }

    #[test]
    fn shared_observation_id_keeps_first_copy() {
        let a = frag(vec![obs("o1", "a", 0)], vec![]);
        let b = frag(vec![obs("o1", "z", 5)], vec![]);
        let d = merge(&[a, b]);
        assert_eq!(d.observations().len(), 1);
        assert_eq!(d.observations()[0].observer_id, "a");
        assert_eq!(d.merge_report().duplicate_observations, 1);
    }

    #[test]
    fn filter_keeps_late_identifications_of_retained_observations() {
        let w = ChallengeWindow::new("c", 2020, t0(), t0() + Duration::hours(10)).unwrap();
        let d = Dataset::from_records(
            vec![obs("o1", "a", 1), obs("o2", "b", 5), obs("o3", "a", -3), obs("o4", "c", 10), obs("o5", "c", 30)],
            vec![ident("i1", "o1", "b", 2), ident("i2", "o2", "a", 500), ident("i3", "o4", "a", 11)],
            vec![w.clone()],
        )
        .unwrap();
        let f = d.filter_by_challenge(&w);
        assert_eq!(f.observations().iter().map(|o| o.id.as_str()).collect::<Vec<_>>(), ["o1", "o2"]);
        assert_eq!(f.identifications().iter().map(|i| i.id.as_str()).collect::<Vec<_>>(), ["i1", "i2"]);
    }

    #[test]
    fn filter_window_extremes() {
        let d =
            Dataset::from_records(vec![obs("o1", "a", 1), obs("o2", "b", 5)], vec![ident("i1", "o1", "b", 2)], vec![])
                .unwrap();
        let all = ChallengeWindow::new("c", 2020, t0() - Duration::days(1), t0() + Duration::days(1)).unwrap();
        assert_eq!(d.filter_by_challenge(&all), d);
        let none = ChallengeWindow::new("c", 2020, t0() + Duration::days(3), t0() + Duration::days(4)).unwrap();
        assert!(d.filter_by_challenge(&none).observations().is_empty());
    }

    #[test]
    fn region_excludes_unlocated_and_outside() {
        use crate::geo::{Coord, Polygon};
        let square = Polygon::new(
            vec![
                Coord::new(0.0, 0.0),
                Coord::new(1.0, 0.0),
                Coord::new(1.0, 1.0),
                Coord::new(0.0, 1.0),
                Coord::new(0.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        let w = ChallengeWindow::new("c", 2020, t0(), t0() + Duration::days(1)).unwrap().with_region(square);
        let inside = obs("o1", "a", 1).with_location(LatLon { lat: 0.5, lon: 0.5 });
        let outside = obs("o2", "a", 1).with_location(LatLon { lat: 2.0, lon: 0.5 });
        let unlocated = obs("o3", "a", 1);
        let d = Dataset::from_records(vec![inside, outside, unlocated], vec![], vec![]).unwrap();
        let f = d.filter_by_challenge(&w);
        assert_eq!(f.observations().len(), 1);
        assert_eq!(f.observations()[0].id, "o1");
    }

    #[test]
    fn duplicate_challenge_rejected() {
        let w = ChallengeWindow::new("c", 2020, t0(), t0() + Duration::days(1)).unwrap();
        assert!(Dataset::from_records(vec![], vec![], vec![w.clone(), w]).is_err());
    }

    fn arb_fragment() -> impl Strategy<Value = Fragment> {
        let o = prop::collection::vec((0u8..8, 0u8..4, 0i64..48), 0..10);
        let i = prop::collection::vec((0u8..12, 0u8..10, 0u8..4, 0i64..48), 0..12);
        (o, i).prop_map(|(o, i)| {
            frag(
                o.into_iter().map(|(id, u, h)| obs(&format!("o{id}"), &format!("u{u}"), h)).collect(),
                i.into_iter()
                    .map(|(id, target, u, h)| ident(&format!("i{id}"), &format!("o{target}"), &format!("u{u}"), h))
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn merge_idempotent_and_conserves_identifications(a in arb_fragment(), b in arb_fragment()) {
            let once = merge(&[a.clone(), b.clone()]);
            let twice = merge(&[a.clone(), b.clone(), a.clone(), b.clone()]);
            prop_assert_eq!(&once, &twice);
            let distinct: HashSet<&str> =
                a.identifications.iter().chain(&b.identifications).map(|i| i.id.as_str()).collect();
            prop_assert_eq!(once.identifications().len() + once.orphan_identifications().len(), distinct.len());
            prop_assert!(once.validate().is_empty());
        }

        #[test]
        fn filtering_is_a_subset_and_idempotent(a in arb_fragment(), start in 0i64..48, len in 1i64..48) {
            let d = merge(&[a]);
            let w = ChallengeWindow::new("c", 2020, t0() + Duration::hours(start), t0() + Duration::hours(start + len)).unwrap();
            let once = d.filter_by_challenge(&w);
            prop_assert!(once.observations().iter().all(|o| d.observations().contains(o)));
            prop_assert!(once.identifications().iter().all(|i| d.identifications().contains(i)));
            prop_assert_eq!(once.filter_by_challenge(&w), once);
        }
    }
}
