//! Per-user activity and contribution-inequality statistics.
//!
//! Shares and curve points are exact rationals. Observation statistics
//! (histogram, Lorenz curve, top shares) only consider rows with at least one
//! observation; pure identifiers are still counted by the trend table's
//! active-user column and by classification.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Rational64;
use serde::Serialize;

use crate::data::{ChallengeKey, ChallengeWindow, Dataset};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("challenge {0} is not configured in the dataset")]
    UnknownWindow(ChallengeKey),
    #[error("no user has any observation")]
    NoObservations,
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(String),
}

/// Activity of one user in one challenge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserActivity {
    pub user_id: String,
    pub challenge: ChallengeKey,
    pub n_observations: u64,
    /// Identifications this user made on other users' observations.
    pub n_identifications: u64,
}

/// One row per user with any attributable activity, ordered by user id.
///
/// Observations count when they fall inside the window; identifications count
/// when they target such an observation and were not made by its observer.
pub fn aggregate_activity(dataset: &Dataset, window: &ChallengeWindow) -> Result<Vec<UserActivity>, StatsError> {
    match dataset.challenge(&window.key()) {
        Some(w) if w.start == window.start && w.end == window.end => {}
        _ => return Err(StatsError::UnknownWindow(window.key())),
    }
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let mut observer_of: HashMap<&str, &str> = HashMap::new();
    for o in dataset.observations().iter().filter(|o| window.contains(o)) {
        observer_of.insert(o.id.as_str(), o.observer_id.as_str());
        counts.entry(o.observer_id.as_str()).or_default().0 += 1;
    }
    for i in dataset.identifications() {
        match observer_of.get(i.observation_id.as_str()) {
            Some(&observer) if observer != i.identifier_id => {
                counts.entry(i.identifier_id.as_str()).or_default().1 += 1;
            }
            _ => {}
        }
    }
    let key = window.key();
    Ok(counts
        .into_iter()
        .map(|(user, (n_observations, n_identifications))| UserActivity {
            user_id: user.to_string(),
            challenge: key.clone(),
            n_observations,
            n_identifications,
        })
        .collect())
}

/// Number of users per observation count, over rows with at least one observation.
pub fn observation_histogram(activities: &[UserActivity]) -> BTreeMap<u64, u64> {
    let mut hist = BTreeMap::new();
    for a in activities.iter().filter(|a| a.n_observations >= 1) {
        *hist.entry(a.n_observations).or_insert(0) += 1;
    }
    hist
}

/// Cumulative observation share across users sorted by ascending contribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LorenzCurve {
    /// `cumulative[i]` = observations held by the bottom `i` users.
    cumulative: Vec<u64>,
}

impl LorenzCurve {
    pub fn n_users(&self) -> usize {
        self.cumulative.len() - 1
    }

    pub fn total(&self) -> u64 {
        *self.cumulative.last().expect("curve has at least the origin")
    }

    /// Exact point at the boundary after the bottom `i` users.
    pub fn point(&self, i: usize) -> (Rational64, Rational64) {
        (
            Rational64::new(i as i64, self.n_users() as i64),
            Rational64::new(self.cumulative[i] as i64, self.total() as i64),
        )
    }

    pub fn points(&self) -> Vec<(Rational64, Rational64)> {
        (0..=self.n_users()).map(|i| self.point(i)).collect()
    }

    pub fn points_f64(&self) -> Vec<(f64, f64)> {
        let n = self.n_users() as f64;
        let total = self.total() as f64;
        self.cumulative.iter().enumerate().map(|(i, &c)| (i as f64 / n, c as f64 / total)).collect()
    }
}

fn contributors(activities: &[UserActivity]) -> Vec<&UserActivity> {
    activities.iter().filter(|a| a.n_observations >= 1).collect()
}

pub fn lorenz(activities: &[UserActivity]) -> Result<LorenzCurve, StatsError> {
    let mut rows = contributors(activities);
    if rows.is_empty() {
        return Err(StatsError::NoObservations);
    }
    rows.sort_by(|a, b| {
        (a.n_observations, &a.user_id, &a.challenge).cmp(&(b.n_observations, &b.user_id, &b.challenge))
    });
    let mut cumulative = Vec::with_capacity(rows.len() + 1);
    let mut running = 0u64;
    cumulative.push(0);
    for r in rows {
        running += r.n_observations;
        cumulative.push(running);
    }
    Ok(LorenzCurve { cumulative })
}

/// Share of observations held by the top `max(1, floor(fraction · N))` contributors.
pub fn top_share(activities: &[UserActivity], fraction: Rational64) -> Result<Rational64, StatsError> {
    if fraction <= Rational64::from_integer(0) || fraction > Rational64::from_integer(1) {
        return Err(StatsError::InvalidFraction(fraction.to_string()));
    }
    let mut rows = contributors(activities);
    if rows.is_empty() {
        return Err(StatsError::NoObservations);
    }
    rows.sort_by(|a, b| {
        (Reverse(a.n_observations), &a.user_id, &a.challenge).cmp(&(
            Reverse(b.n_observations),
            &b.user_id,
            &b.challenge,
        ))
    });
    let n = rows.len() as i64;
    let k = (fraction * n).floor().to_integer().max(1) as usize;
    let total: u64 = rows.iter().map(|r| r.n_observations).sum();
    let top: u64 = rows[..k].iter().map(|r| r.n_observations).sum();
    Ok(Rational64::new(top as i64, total as i64))
}

/// [`top_share`] for a decimal fraction, converted to the nearest simple rational.
pub fn top_share_f64(activities: &[UserActivity], fraction: f64) -> Result<f64, StatsError> {
    let f = Rational64::approximate_float(fraction).ok_or_else(|| StatsError::InvalidFraction(fraction.to_string()))?;
    top_share(activities, f).map(|r| *r.numer() as f64 / *r.denom() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub city: String,
    pub year: i32,
    pub n_observations: u64,
    /// Users with at least one observation.
    pub n_users: u64,
    /// Users with any observation or identification.
    pub n_active_users: u64,
}

impl TrendRow {
    /// Observations per observing user; zero when nobody observed.
    pub fn mean(&self) -> Rational64 {
        ratio_or_zero(self.n_observations, self.n_users)
    }

    /// Observations per active user (observers plus identifiers).
    pub fn mean_active(&self) -> Rational64 {
        ratio_or_zero(self.n_observations, self.n_active_users)
    }
}

fn ratio_or_zero(num: u64, den: u64) -> Rational64 {
    if den == 0 {
        Rational64::from_integer(0)
    } else {
        Rational64::new(num as i64, den as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrendTable {
    pub rows: Vec<TrendRow>,
}

/// One row per configured challenge, ordered by `(city, year)`.
pub fn per_city_year_trends(dataset: &Dataset) -> TrendTable {
    let rows = dataset
        .sorted_challenges()
        .into_iter()
        .map(|w| {
            let acts = aggregate_activity(dataset, w).expect("window comes from the dataset");
            TrendRow {
                city: w.city.clone(),
                year: w.year,
                n_observations: acts.iter().map(|a| a.n_observations).sum(),
                n_users: acts.iter().filter(|a| a.n_observations > 0).count() as u64,
                n_active_users: acts.len() as u64,
            }
        })
        .collect();
    TrendTable { rows }
}

/// Distinct users with activity rows in two or more challenges.
pub fn multi_challenge_users(dataset: &Dataset) -> usize {
    let mut seen: BTreeMap<String, BTreeSet<ChallengeKey>> = BTreeMap::new();
    for w in dataset.challenges() {
        for a in aggregate_activity(dataset, w).expect("window comes from the dataset") {
            seen.entry(a.user_id).or_default().insert(a.challenge);
        }
    }
    seen.values().filter(|s| s.len() >= 2).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{IdentificationRecord, ObservationRecord};
    use chrono::{Duration, TimeZone, Utc};
    use proptest::prelude::*;

    fn act(user: &str, n_obs: u64) -> UserActivity {
        UserActivity {
            user_id: user.into(),
            challenge: ChallengeKey::new("c", 2020),
            n_observations: n_obs,
            n_identifications: 0,
        }
    }

    fn acts(counts: &[u64]) -> Vec<UserActivity> {
        counts.iter().enumerate().map(|(i, &c)| act(&format!("u{i:03}"), c)).collect()
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn t(h: i64) -> chrono::DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 4, 24, 0, 0, 0).unwrap() + Duration::hours(h)
    }

    fn window(city: &str, year: i32, from_h: i64, to_h: i64) -> ChallengeWindow {
        ChallengeWindow::new(city, year, t(from_h), t(to_h)).unwrap()
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(observation_histogram(&acts(&[1, 1, 1])), BTreeMap::from([(1, 3)]));
        assert_eq!(observation_histogram(&acts(&[1, 1, 5, 0])), BTreeMap::from([(1, 2), (5, 1)]));
    }

    #[test]
    fn lorenz_bottom_80_percent_hold_40_percent() {
        let c = lorenz(&acts(&[1, 1, 1, 1, 6])).unwrap();
        assert_eq!(c.point(4), (r(4, 5), r(2, 5)));
        assert_eq!(c.point(0), (r(0, 1), r(0, 1)));
        assert_eq!(c.point(5), (r(1, 1), r(1, 1)));
    }

    #[test]
    fn equal_contributors_lie_on_the_diagonal() {
        let c = lorenz(&acts(&[3; 7])).unwrap();
        for (x, y) in c.points() {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn lorenz_without_observations_fails() {
        assert_eq!(lorenz(&acts(&[0, 0])), Err(StatsError::NoObservations));
    }

    #[test]
    fn top_share_examples() {
        let a = acts(&[1, 1, 1, 1, 6]);
        assert_eq!(top_share(&a, r(1, 1)).unwrap(), r(1, 1));
        assert_eq!(top_share(&a, r(1, 5)).unwrap(), r(3, 5));
        assert!((top_share_f64(&a, 0.2).unwrap() - 0.6).abs() < 1e-15);
        // k never drops below one user
        assert_eq!(top_share(&a, r(1, 100)).unwrap(), r(3, 5));
        assert!(top_share(&a, r(0, 1)).is_err());
        assert!(top_share(&a, r(3, 2)).is_err());
        assert_eq!(top_share(&[], r(1, 2)), Err(StatsError::NoObservations));
    }

    #[test]
    fn aggregate_excludes_self_identifications() {
        let w = window("c", 2020, 0, 48);
        let d = Dataset::from_records(
            vec![
                ObservationRecord::new("o1", "a", t(1)),
                ObservationRecord::new("o2", "a", t(2)),
                ObservationRecord::new("o3", "a", t(3)),
                ObservationRecord::new("o4", "self", t(3)),
                ObservationRecord::new("o5", "b", t(60)),
            ],
            vec![
                IdentificationRecord::new("i1", "o4", "self", t(4), "x"),
                IdentificationRecord::new("i2", "o1", "id", t(100), "x"),
                IdentificationRecord::new("i3", "o2", "id", t(5), "x"),
                IdentificationRecord::new("i4", "o5", "late", t(61), "x"),
                IdentificationRecord::new("i5", "o4", "only_self_ident", t(4), "x"),
                IdentificationRecord::new("i6", "o3", "a", t(4), "x"),
            ],
            vec![w.clone()],
        )
        .unwrap();
        let rows = aggregate_activity(&d, &w).unwrap();
        let got: Vec<(&str, u64, u64)> =
            rows.iter().map(|a| (a.user_id.as_str(), a.n_observations, a.n_identifications)).collect();
        assert_eq!(got, vec![("a", 3, 0), ("id", 0, 2), ("only_self_ident", 0, 1), ("self", 1, 0)]);
    }

    #[test]
    fn unknown_window_rejected() {
        let d = Dataset::from_records(vec![], vec![], vec![window("c", 2020, 0, 10)]).unwrap();
        assert!(matches!(aggregate_activity(&d, &window("c", 2021, 0, 10)), Err(StatsError::UnknownWindow(_))));
        assert!(matches!(aggregate_activity(&d, &window("c", 2020, 0, 11)), Err(StatsError::UnknownWindow(_))));
    }

    #[test]
    fn trends_and_multi_challenge_users() {
        let w1 = window("c", 2020, 0, 10);
        let w2 = window("d", 2020, 20, 30);
        let mut obs = Vec::new();
        for k in 0..10 {
            obs.push(ObservationRecord::new(format!("a{k}"), format!("u{}", k % 5), t(1)));
        }
        obs.push(ObservationRecord::new("b1", "u0", t(21)));
        obs.push(ObservationRecord::new("b2", "v", t(22)));
        let d = Dataset::from_records(obs, vec![IdentificationRecord::new("i", "b2", "w", t(23), "x")], vec![w2, w1])
            .unwrap();
        let table = per_city_year_trends(&d);
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].city, "c");
        assert_eq!((table.rows[0].n_observations, table.rows[0].n_users), (10, 5));
        assert_eq!(table.rows[0].mean(), r(2, 1));
        assert_eq!((table.rows[1].n_observations, table.rows[1].n_users, table.rows[1].n_active_users), (2, 2, 3));
        assert_eq!(multi_challenge_users(&d), 1);
    }

    #[test]
    fn disjoint_challenges_share_nobody() {
        let d = Dataset::from_records(
            vec![ObservationRecord::new("o1", "a", t(1)), ObservationRecord::new("o2", "b", t(21))],
            vec![],
            vec![window("c", 2020, 0, 10), window("c", 2021, 20, 30)],
        )
        .unwrap();
        assert_eq!(multi_challenge_users(&d), 0);
    }

    proptest! {
        #[test]
        fn share_properties(counts in prop::collection::vec(0u64..50, 1..60)) {
            let a = acts(&counts);
            let total: u64 = counts.iter().sum();
            prop_assume!(total > 0);
            let hist = observation_histogram(&a);
            prop_assert_eq!(hist.iter().map(|(c, n)| c * n).sum::<u64>(), total);
            let n = counts.iter().filter(|&&c| c > 0).count() as i64;
            let mut prev = r(0, 1);
            for i in 1..=n {
                let s = top_share(&a, r(i, n)).unwrap();
                prop_assert!(s >= prev);
                prev = s;
            }
            prop_assert_eq!(prev, r(1, 1));
            let curve = lorenz(&a).unwrap();
            let pts = curve.points();
            for w in pts.windows(3) {
                // convexity: slopes nondecreasing
                let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                prop_assert!(s2 >= s1);
            }
        }
    }
}
