//! Join cohorts, monthly retention and next-year participation.
//!
//! A user's join time is their first recorded event. Month `m` after joining
//! is `[joined_at + 30m days, joined_at + 30(m+1) days)`; the joining event
//! makes every user active in month 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, Duration};
use serde::{Deserialize, Serialize};

use crate::data::{ChallengeWindow, Dataset, LatLon, Timestamp};

pub const MONTH_DAYS: i64 = 30;
pub const DEFAULT_HORIZON: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttritionError {
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("mismatched windows: {0}")]
    MismatchedWindows(String),
    #[error("user {0} has no events in the dataset")]
    UnknownUser(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    /// Observations and identifications.
    #[default]
    All,
    ObservationsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinKind {
    Challenge,
    Regular,
}

impl JoinKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Challenge => "challenge",
            Self::Regular => "regular",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JoinInfo {
    pub user_id: String,
    pub joined_at: Timestamp,
    pub join_kind: JoinKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CohortId {
    pub city: String,
    pub year: i32,
    pub kind: JoinKind,
}

impl fmt::Display for CohortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.city, self.year, self.kind.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cohorts {
    pub challenge: BTreeSet<String>,
    pub regular: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionCurve {
    pub cohort_id: CohortId,
    pub cohort_size: usize,
    /// Active users per month, month 0 first.
    pub active: Vec<usize>,
}

impl RetentionCurve {
    pub fn value(&self, month: usize) -> f64 {
        self.active[month] as f64 / self.cohort_size as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.active.len()).map(|m| self.value(m)).collect()
    }

    pub fn horizon(&self) -> usize {
        self.active.len() - 1
    }
}

/// Earliest event per user over observations and identifications.
pub fn first_activity(dataset: &Dataset) -> BTreeMap<String, Timestamp> {
    let mut first: BTreeMap<String, Timestamp> = BTreeMap::new();
    let events = dataset
        .observations()
        .iter()
        .map(|o| (&o.observer_id, o.observed_at))
        .chain(dataset.identifications().iter().map(|i| (&i.identifier_id, i.created_at)));
    for (user, t) in events {
        first.entry(user.clone()).and_modify(|f| *f = (*f).min(t)).or_insert(t);
    }
    first
}

/// Where each user's first event happened: the observation's location, or for
/// an identification the location of the observation it targets. Ties in time
/// go to observations, then to dataset order.
fn join_locations(dataset: &Dataset) -> BTreeMap<String, (Timestamp, Option<LatLon>)> {
    let mut first: BTreeMap<String, (Timestamp, Option<LatLon>)> = BTreeMap::new();
    let mut offer = |user: &String, t: Timestamp, loc: Option<LatLon>| match first.get_mut(user) {
        Some(f) if t < f.0 => *f = (t, loc),
        Some(_) => {}
        None => {
            first.insert(user.clone(), (t, loc));
        }
    };
    for o in dataset.observations() {
        offer(&o.observer_id, o.observed_at, o.location);
    }
    for i in dataset.identifications() {
        offer(&i.identifier_id, i.created_at, dataset.observation(&i.observation_id).and_then(|o| o.location));
    }
    first
}

/// Per-user sorted event times plus join times, built once per dataset.
#[derive(Debug, Clone)]
pub struct ActivityIndex {
    joined: BTreeMap<String, Timestamp>,
    join_location: BTreeMap<String, Option<LatLon>>,
    events: BTreeMap<String, Vec<Timestamp>>,
    kind: ActivityKind,
}

impl ActivityIndex {
    pub fn new(dataset: &Dataset, kind: ActivityKind) -> Self {
        let mut events: BTreeMap<String, Vec<Timestamp>> = BTreeMap::new();
        for o in dataset.observations() {
            events.entry(o.observer_id.clone()).or_default().push(o.observed_at);
        }
        if kind == ActivityKind::All {
            for i in dataset.identifications() {
                events.entry(i.identifier_id.clone()).or_default().push(i.created_at);
            }
        }
        for v in events.values_mut() {
            v.sort_unstable();
        }
        let first = join_locations(dataset);
        let joined = first.iter().map(|(u, (t, _))| (u.clone(), *t)).collect();
        let join_location = first.into_iter().map(|(u, (_, l))| (u, l)).collect();
        Self { joined, join_location, events, kind }
    }

    pub fn kind(&self) -> ActivityKind {
        self.kind
    }

    pub fn joined_at(&self, user: &str) -> Option<Timestamp> {
        self.joined.get(user).copied()
    }

    fn active_between(&self, user: &str, from: Timestamp, to: Timestamp) -> bool {
        let Some(ts) = self.events.get(user) else { return false };
        let i = ts.partition_point(|&t| t < from);
        i < ts.len() && ts[i] < to
    }

    /// True when the user's first event lies in the window's region; always
    /// true for windows without one.
    fn joined_in_region(&self, user: &str, window: &ChallengeWindow) -> bool {
        match &window.region {
            None => true,
            Some(r) => self.join_location.get(user).copied().flatten().is_some_and(|p| r.contains(p)),
        }
    }

    /// Challenge and regular join cohorts for the window's year. With a
    /// region on the window, only users whose first event lies inside it count.
    pub fn cohorts(&self, window: &ChallengeWindow, all_windows: &[ChallengeWindow]) -> Cohorts {
        let mut c = Cohorts::default();
        for (user, &t) in &self.joined {
            if !self.joined_in_region(user, window) {
                continue;
            }
            if window.contains_time(t) {
                c.challenge.insert(user.clone());
            } else if t.year() == window.year && !all_windows.iter().any(|w| w.contains_time(t)) {
                c.regular.insert(user.clone());
            }
        }
        c
    }

    pub fn retention(
        &self,
        cohort_id: CohortId,
        cohort: &BTreeSet<String>,
        horizon: usize,
    ) -> Result<RetentionCurve, AttritionError> {
        if cohort.is_empty() {
            return Err(AttritionError::EmptyCohort);
        }
        let mut active = vec![0usize; horizon + 1];
        for user in cohort {
            let j = self.joined_at(user).ok_or_else(|| AttritionError::UnknownUser(user.clone()))?;
            active[0] += 1;
            for (m, slot) in active.iter_mut().enumerate().skip(1) {
                let from = j + Duration::days(MONTH_DAYS * m as i64);
                if self.active_between(user, from, from + Duration::days(MONTH_DAYS)) {
                    *slot += 1;
                }
            }
        }
        Ok(RetentionCurve { cohort_id, cohort_size: cohort.len(), active })
    }
}

pub fn build_cohorts(dataset: &Dataset, window: &ChallengeWindow) -> Cohorts {
    ActivityIndex::new(dataset, ActivityKind::All).cohorts(window, dataset.challenges())
}

pub fn join_infos(dataset: &Dataset, window: &ChallengeWindow) -> Vec<JoinInfo> {
    let index = ActivityIndex::new(dataset, ActivityKind::All);
    let c = index.cohorts(window, dataset.challenges());
    let mut out: Vec<JoinInfo> = c
        .challenge
        .iter()
        .map(|u| (u, JoinKind::Challenge))
        .chain(c.regular.iter().map(|u| (u, JoinKind::Regular)))
        .map(|(u, kind)| JoinInfo { user_id: u.clone(), joined_at: index.joined[u], join_kind: kind })
        .collect();
    out.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    out
}

pub fn retention_curve(
    dataset: &Dataset,
    cohort_id: CohortId,
    cohort: &BTreeSet<String>,
    horizon: usize,
    kind: ActivityKind,
) -> Result<RetentionCurve, AttritionError> {
    ActivityIndex::new(dataset, kind).retention(cohort_id, cohort, horizon)
}

/// Both cohorts' curves for every configured window, skipping empty cohorts.
pub fn all_retention_curves(dataset: &Dataset, horizon: usize, kind: ActivityKind) -> Vec<RetentionCurve> {
    let index = ActivityIndex::new(dataset, kind);
    let mut curves = Vec::new();
    for w in dataset.sorted_challenges() {
        let c = index.cohorts(w, dataset.challenges());
        for (set, join_kind) in [(&c.challenge, JoinKind::Challenge), (&c.regular, JoinKind::Regular)] {
            let id = CohortId { city: w.city.clone(), year: w.year, kind: join_kind };
            if let Ok(curve) = index.retention(id, set, horizon) {
                curves.push(curve);
            }
        }
    }
    curves
}

/// Share of users who joined during `window_y` (inside its region, if any)
/// with any activity in `window_y1`.
pub fn next_year_participation(
    dataset: &Dataset,
    window_y: &ChallengeWindow,
    window_y1: &ChallengeWindow,
) -> Result<f64, AttritionError> {
    if window_y.city != window_y1.city || window_y1.year != window_y.year + 1 {
        return Err(AttritionError::MismatchedWindows(format!("{} then {}", window_y.key(), window_y1.key())));
    }
    let index = ActivityIndex::new(dataset, ActivityKind::All);
    let joiners: BTreeSet<String> = index
        .joined
        .iter()
        .filter(|(u, t)| window_y.contains_time(**t) && index.joined_in_region(u, window_y))
        .map(|(u, _)| u.clone())
        .collect();
    if joiners.is_empty() {
        return Err(AttritionError::EmptyCohort);
    }
    let mut returned: BTreeSet<&str> = BTreeSet::new();
    for o in dataset.observations().iter().filter(|o| window_y1.contains(o)) {
        if joiners.contains(&o.observer_id) {
            returned.insert(&o.observer_id);
        }
    }
    for i in dataset.identifications().iter().filter(|i| window_y1.contains_time(i.created_at)) {
        if joiners.contains(&i.identifier_id) {
            returned.insert(&i.identifier_id);
        }
    }
    Ok(returned.len() as f64 / joiners.len() as f64)
}
