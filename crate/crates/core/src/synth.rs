//! Seeded synthetic communities with planted ground truth.
//!
//! Every concern (classes, joins, counts, times, space, taxa, dropout, wiring)
//! draws from its own ChaCha stream derived from the master seed.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Datelike, Duration, TimeZone, Utc};
use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::attrition::MONTH_DAYS;
use crate::classify::UserClass;
use crate::data::{
    derive_quality_grade, ChallengeWindow, Dataset, IdentificationRecord, LatLon, ObservationRecord, Timestamp,
};
use crate::geo::{BBox, GridSpec, LandClass, LayerPolygon, Polygon, PolygonLayer};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("generated dataset violates invariants: {0}")]
    Internal(String),
}

/// Discretized log-normal counts: `round(median · exp(sigma · Z))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassActivity {
    pub obs_median: f64,
    pub ids_median: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub city: String,
    pub year: i32,
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    pub bbox: BBox,
    pub greenspace: Vec<BBox>,
    /// Probability that a user observes only inside greenspace.
    pub green_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub seed: u64,
    pub n_users: usize,
    /// Low activity, observer, identifier, high activity.
    pub class_mixture: [f64; 4],
    pub activity: [ClassActivity; 4],
    pub monthly_survival: f64,
    pub max_months: usize,
    /// Share of users whose first event falls inside the window.
    pub challenge_join_fraction: f64,
    /// Relative chance of a high-activity user's observation being identified.
    pub hub_weight: f64,
    pub n_taxa: usize,
    pub window: WindowSpec,
    pub spatial: SpatialParams,
}

impl SynthParams {
    /// The reference scenario: class mixture 0.58/0.25/0.12/0.05 over a
    /// four-day window in a London-sized box.
    pub fn standard(seed: u64, n_users: usize) -> Self {
        let at = |d: u32| Utc.with_ymd_and_hms(2020, 4, d, 0, 0, 0).unwrap();
        let bbox = |a, b, c, d| BBox { min_lat: a, min_lon: b, max_lat: c, max_lon: d };
        Self {
            seed,
            n_users,
            class_mixture: [0.58, 0.25, 0.12, 0.05],
            activity: [
                ClassActivity { obs_median: 2.0, ids_median: 0.4, sigma: 0.5 },
                ClassActivity { obs_median: 30.0, ids_median: 1.0, sigma: 0.5 },
                ClassActivity { obs_median: 2.0, ids_median: 30.0, sigma: 0.5 },
                ClassActivity { obs_median: 40.0, ids_median: 40.0, sigma: 0.5 },
            ],
            monthly_survival: 0.5,
            max_months: 12,
            challenge_join_fraction: 1.0,
            hub_weight: 20.0,
            n_taxa: 60,
            window: WindowSpec { city: "synthville".into(), year: 2020, start: at(24), end: at(28) },
            spatial: SpatialParams {
                bbox: bbox(51.28, -0.51, 51.69, 0.33),
                greenspace: vec![
                    bbox(51.50, -0.19, 51.52, -0.15),
                    bbox(51.35, -0.30, 51.40, -0.20),
                    bbox(51.55, 0.0, 51.60, 0.10),
                ],
                green_weight: 0.25,
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        toml::from_str(text).map_err(|e| SynthError::InvalidParams(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("params serialize")
    }

    pub fn challenge_window(&self) -> ChallengeWindow {
        ChallengeWindow::new(&self.window.city, self.window.year, self.window.start, self.window.end)
            .expect("validated window")
    }

    pub fn greenspace_layer(&self) -> PolygonLayer {
        PolygonLayer::new(
            self.spatial
                .greenspace
                .iter()
                .map(|&b| LayerPolygon { class: LandClass::Greenspace, polygon: Polygon::rectangle(b) })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParams(m));
        let sum: f64 = self.class_mixture.iter().sum();
        if self.class_mixture.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return bad(format!("class mixture must be nonnegative and sum to 1, got {:?}", self.class_mixture));
        }
        for a in &self.activity {
            if !(a.obs_median > 0.0 && a.ids_median > 0.0 && a.sigma >= 0.0 && a.sigma.is_finite()) {
                return bad(format!("activity law needs positive medians and finite sigma >= 0: {a:?}"));
            }
        }
        if !(self.monthly_survival > 0.0 && self.monthly_survival <= 1.0) {
            return bad(format!("monthly survival must be in (0, 1], got {}", self.monthly_survival));
        }
        if !(0.0..=1.0).contains(&self.challenge_join_fraction) {
            return bad(format!("challenge join fraction must be in [0, 1], got {}", self.challenge_join_fraction));
        }
        if !(self.hub_weight > 0.0 && self.hub_weight.is_finite()) {
            return bad(format!("hub weight must be positive, got {}", self.hub_weight));
        }
        if !(0.0..=1.0).contains(&self.spatial.green_weight) {
            return bad(format!("green weight must be in [0, 1], got {}", self.spatial.green_weight));
        }
        if self.spatial.green_weight > 0.0 && self.spatial.greenspace.is_empty() {
            return bad("green weight is positive but no greenspace is defined".into());
        }
        for b in std::iter::once(&self.spatial.bbox).chain(&self.spatial.greenspace) {
            BBox::new(b.min_lat, b.min_lon, b.max_lat, b.max_lon)
                .map_err(|e| SynthError::InvalidParams(e.to_string()))?;
        }
        if self.n_users == 0 || self.n_taxa == 0 {
            return bad("n_users and n_taxa must be positive".into());
        }
        let w = &self.window;
        if w.end - w.start < Duration::seconds(1) || w.end - w.start > Duration::days(MONTH_DAYS) {
            return bad("window must last between one second and 30 days".into());
        }
        if w.start.year() != w.year {
            return bad(format!("window starts in {} but is labeled {}", w.start.year(), w.year));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedJoin {
    Challenge,
    Regular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialRegime {
    Greenspace,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserTruth {
    pub user_id: String,
    pub class: UserClass,
    pub join_kind: PlantedJoin,
    pub joined_at: Timestamp,
    /// Last month after joining with an observation; 0 means none after joining.
    pub dropout_month: usize,
    pub spatial: SpatialRegime,
    pub window_observations: u64,
    pub window_identifications: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PlantedTotals {
    pub window_observations: u64,
    pub identifications: u64,
    pub challenge_users: usize,
    pub regular_users: usize,
    /// Challenge joiners per class, in [`UserClass::ALL`] order.
    pub class_counts: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub users: Vec<UserTruth>,
    /// Interaction weight per `(a, b)` with `a < b`.
    pub edges: BTreeMap<(String, String), u64>,
    pub totals: PlantedTotals,
}

impl GroundTruth {
    pub fn class_of(&self) -> BTreeMap<String, UserClass> {
        self.users.iter().map(|u| (u.user_id.clone(), u.class)).collect()
    }
}

const CLASSES: u64 = 1;
const JOINS: u64 = 2;
const COUNTS: u64 = 3;
const TIMES: u64 = 4;
const SPACE: u64 = 5;
const TAXA: u64 = 6;
const DROPOUT: u64 = 7;
const WIRING: u64 = 8;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn lognormal_count(rng: &mut ChaCha8Rng, median: f64, sigma: f64) -> u64 {
    if sigma == 0.0 {
        return median.round() as u64;
    }
    let d = LogNormal::new(median.ln(), sigma).expect("validated parameters");
    d.sample(rng).round() as u64
}

fn uniform_point(rng: &mut ChaCha8Rng, b: &BBox) -> LatLon {
    LatLon { lat: rng.gen_range(b.min_lat..b.max_lat), lon: rng.gen_range(b.min_lon..b.max_lon) }
}

fn id_width(n: usize, min: usize) -> usize {
    n.to_string().len().max(min)
}

struct RawObs {
    owner: usize,
    at: Timestamp,
    location: LatLon,
    taxon: usize,
    in_window: bool,
}

struct RawIdent {
    identifier: usize,
    target: usize,
    at: Timestamp,
}

/// Generates a dataset and its ground truth; identical params give identical output.
pub fn generate(params: &SynthParams) -> Result<(Dataset, GroundTruth), SynthError> {
    params.validate()?;
    let n = params.n_users;
    let w = &params.window;
    let seed = params.seed;

    let mut rng = stream(seed, CLASSES);
    let class_pick = WeightedIndex::new(params.class_mixture).map_err(|e| SynthError::InvalidParams(e.to_string()))?;
    let classes: Vec<UserClass> = (0..n).map(|_| UserClass::ALL[class_pick.sample(&mut rng)]).collect();

    let mut rng = stream(seed, JOINS);
    let joins: Vec<PlantedJoin> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < params.challenge_join_fraction {
                PlantedJoin::Challenge
            } else {
                PlantedJoin::Regular
            }
        })
        .collect();

    let year_end = Utc.with_ymd_and_hms(w.year + 1, 1, 1, 0, 0, 0).single().expect("valid year");
    let regular_span = (year_end - w.end).num_seconds();
    if joins.contains(&PlantedJoin::Regular) && regular_span < 1 {
        return Err(SynthError::Infeasible("no room after the window for regular joiners".into()));
    }

    let mut rng = stream(seed, COUNTS);
    let mut counts: Vec<(u64, u64)> = Vec::with_capacity(n);
    for (u, &class) in classes.iter().enumerate() {
        let a = params.activity[class as usize];
        let obs = lognormal_count(&mut rng, a.obs_median, a.sigma).max(1);
        let ids = lognormal_count(&mut rng, a.ids_median, a.sigma);
        counts.push(if joins[u] == PlantedJoin::Challenge { (obs, ids) } else { (0, 0) });
    }

    let mut rng = stream(seed, DROPOUT);
    let dropout: Vec<usize> = (0..n)
        .map(|_| {
            let mut d = 0;
            while d < params.max_months && rng.gen::<f64>() < params.monthly_survival {
                d += 1;
            }
            d
        })
        .collect();

    let mut rng = stream(seed, SPACE);
    let regimes: Vec<SpatialRegime> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < params.spatial.green_weight {
                SpatialRegime::Greenspace
            } else {
                SpatialRegime::Background
            }
        })
        .collect();
    let place = |u: usize, rng: &mut ChaCha8Rng| match regimes[u] {
        SpatialRegime::Greenspace => {
            let b = params.spatial.greenspace[rng.gen_range(0..params.spatial.greenspace.len())];
            uniform_point(rng, &b)
        }
        SpatialRegime::Background => uniform_point(rng, &params.spatial.bbox),
    };

    // times: join instant, then in-window observations, then monthly follow-ups
    let mut times = stream(seed, TIMES);
    let mut taxa = stream(seed, TAXA);
    let window_secs = (w.end - w.start).num_seconds();
    let mut joined = Vec::with_capacity(n);
    let mut raw_obs: Vec<RawObs> = Vec::new();
    for u in 0..n {
        let (j, in_window) = match joins[u] {
            PlantedJoin::Challenge => (w.start + Duration::seconds(times.gen_range(0..window_secs)), true),
            PlantedJoin::Regular => (w.end + Duration::seconds(times.gen_range(0..regular_span)), false),
        };
        joined.push(j);
        let n_first = counts[u].0.max(1);
        for k in 0..n_first {
            let at = if k == 0 { j } else { j + Duration::seconds(times.gen_range(0..(w.end - j).num_seconds())) };
            let location = place(u, &mut rng);
            raw_obs.push(RawObs { owner: u, at, location, taxon: taxa.gen_range(0..params.n_taxa), in_window });
        }
        let month = MONTH_DAYS * 86_400;
        for m in 1..=dropout[u] as i64 {
            let at = j + Duration::seconds(month * m + times.gen_range(1..month));
            let location = place(u, &mut rng);
            raw_obs.push(RawObs { owner: u, at, location, taxon: taxa.gen_range(0..params.n_taxa), in_window: false });
        }
    }

    // wiring: identifications onto other users' in-window observations
    let targets: Vec<usize> = (0..raw_obs.len()).filter(|&i| raw_obs[i].in_window).collect();
    let mut raw_ids: Vec<RawIdent> = Vec::new();
    let demanded: u64 = counts.iter().map(|c| c.1).sum();
    if demanded > 0 {
        let owners: std::collections::BTreeSet<usize> = targets.iter().map(|&i| raw_obs[i].owner).collect();
        if owners.len() < 2 {
            return Err(SynthError::Infeasible("identifications demanded but fewer than two users observe".into()));
        }
        let weights: Vec<f64> = targets
            .iter()
            .map(|&i| if classes[raw_obs[i].owner] == UserClass::HighActivity { params.hub_weight } else { 1.0 })
            .collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| SynthError::Internal(e.to_string()))?;
        let mut rng = stream(seed, WIRING);
        for u in 0..n {
            for _ in 0..counts[u].1 {
                let target = loop {
                    let t = targets[pick.sample(&mut rng)];
                    if raw_obs[t].owner != u {
                        break t;
                    }
                };
                let from = joined[u].max(raw_obs[target].at);
                let at = from + Duration::seconds(rng.gen_range(0..(w.end - from).num_seconds()));
                raw_ids.push(RawIdent { identifier: u, target, at });
            }
        }
    }

    // canonical order and identifiers
    let uw = id_width(n, 5);
    let user_ids: Vec<String> = (1..=n).map(|i| format!("u{i:0uw$}")).collect();
    let mut order: Vec<usize> = (0..raw_obs.len()).collect();
    order.sort_by(|&a, &b| {
        (raw_obs[a].at, &user_ids[raw_obs[a].owner], a).cmp(&(raw_obs[b].at, &user_ids[raw_obs[b].owner], b))
    });
    let ow = id_width(raw_obs.len(), 6);
    let mut obs_id = vec![String::new(); raw_obs.len()];
    for (rank, &i) in order.iter().enumerate() {
        obs_id[i] = format!("o{:0ow$}", rank + 1);
    }
    let taxon_name = |t: usize| format!("t{:03}", t + 1);

    let mut id_order: Vec<usize> = (0..raw_ids.len()).collect();
    id_order.sort_by(|&a, &b| {
        let (x, y) = (&raw_ids[a], &raw_ids[b]);
        (x.at, &user_ids[x.identifier], &obs_id[x.target], a).cmp(&(
            y.at,
            &user_ids[y.identifier],
            &obs_id[y.target],
            b,
        ))
    });
    let iw = id_width(raw_ids.len(), 6);
    let identifications: Vec<IdentificationRecord> = id_order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let r = &raw_ids[i];
            let mut rec = IdentificationRecord::new(
                format!("i{:0iw$}", rank + 1),
                obs_id[r.target].clone(),
                user_ids[r.identifier].clone(),
                r.at,
                taxon_name(raw_obs[r.target].taxon),
            );
            rec.agrees_with_community = Some(true);
            rec
        })
        .collect();

    let mut by_obs: HashMap<&str, Vec<&IdentificationRecord>> = HashMap::new();
    for i in &identifications {
        by_obs.entry(i.observation_id.as_str()).or_default().push(i);
    }
    let mut observations = Vec::with_capacity(raw_obs.len());
    for &i in &order {
        let r = &raw_obs[i];
        let mut rec = ObservationRecord::new(obs_id[i].clone(), user_ids[r.owner].clone(), r.at)
            .with_location(r.location)
            .with_taxon(taxon_name(r.taxon));
        rec.submitted_at = Some(r.at);
        rec.initial_guess_taxon = rec.taxon_id.clone();
        let grade = derive_quality_grade(&rec, by_obs.get(rec.id.as_str()).into_iter().flatten().copied())
            .map_err(|e| SynthError::Internal(e.to_string()))?;
        rec.quality_grade = Some(grade);
        observations.push(rec);
    }

    let mut edges: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut made = vec![0u64; n];
    for r in &raw_ids {
        let (a, b) = (&user_ids[r.identifier], &user_ids[raw_obs[r.target].owner]);
        let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        *edges.entry(key).or_insert(0) += 1;
        made[r.identifier] += 1;
    }

    let mut totals = PlantedTotals::default();
    let users: Vec<UserTruth> = (0..n)
        .map(|u| {
            match joins[u] {
                PlantedJoin::Challenge => {
                    totals.challenge_users += 1;
                    totals.class_counts[classes[u] as usize] += 1;
                }
                PlantedJoin::Regular => totals.regular_users += 1,
            }
            totals.window_observations += counts[u].0;
            UserTruth {
                user_id: user_ids[u].clone(),
                class: classes[u],
                join_kind: joins[u],
                joined_at: joined[u],
                dropout_month: dropout[u],
                spatial: regimes[u],
                window_observations: counts[u].0,
                window_identifications: made[u],
            }
        })
        .collect();
    totals.identifications = raw_ids.len() as u64;

    let dataset = Dataset::from_records(observations, identifications, vec![params.challenge_window()])
        .map_err(|e| SynthError::Internal(e.to_string()))?;
    let problems = dataset.validate();
    if !problems.is_empty() {
        return Err(SynthError::Internal(problems.join("; ")));
    }
    Ok((dataset, GroundTruth { users, edges, totals }))
}

/// One taxon observed over successive years, each year spreading evenly over a
/// larger `(k+1) × (k+1)` block of grid cells, so the cell entropy is
/// `ln((k+1)²)` in year `k`.
pub fn planted_dispersal(
    seed: u64,
    taxon: &str,
    first_year: i32,
    years: usize,
    per_cell: usize,
    grid: &GridSpec,
) -> Result<Dataset, SynthError> {
    if years > grid.nx.min(grid.ny) {
        return Err(SynthError::Infeasible(format!("{years} years need at least a {years}x{years} grid")));
    }
    let mut rng = stream(seed, SPACE);
    let b = grid.bbox;
    let (cw, ch) = ((b.max_lon - b.min_lon) / grid.nx as f64, (b.max_lat - b.min_lat) / grid.ny as f64);
    let mut obs = Vec::new();
    let mut windows = Vec::new();
    for k in 0..years {
        let year = first_year + k as i32;
        let start = Utc.with_ymd_and_hms(year, 4, 24, 0, 0, 0).single().expect("valid date");
        windows
            .push(ChallengeWindow::new("synthville", year, start, start + Duration::days(4)).expect("positive window"));
        for i in 0..=k {
            for j in 0..=k {
                for _ in 0..per_cell {
                    // stay clear of cell edges so rounding cannot move a point
                    let lon = b.min_lon + cw * (i as f64 + rng.gen_range(0.05..0.95));
                    let lat = b.min_lat + ch * (j as f64 + rng.gen_range(0.05..0.95));
                    let id = format!("{taxon}-{year}-{:05}", obs.len() + 1);
                    let at = start + Duration::seconds(rng.gen_range(0..4 * 86_400));
                    obs.push(
                        ObservationRecord::new(id, format!("u{:03}", rng.gen_range(1..=50)), at)
                            .with_location(LatLon { lat, lon })
                            .with_taxon(taxon),
                    );
                }
            }
        }
    }
    Dataset::from_records(obs, vec![], windows).map_err(|e| SynthError::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrition::first_activity;
    use crate::network::build_graph;

    fn small(seed: u64) -> SynthParams {
        SynthParams::standard(seed, 400)
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, _) = generate(&small(3)).unwrap();
        let (b, _) = generate(&small(3)).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut x).unwrap();
        b.write_jsonl(&mut y).unwrap();
        assert_eq!(x, y);
        let (c, _) = generate(&small(4)).unwrap();
        let mut z = Vec::new();
        c.write_jsonl(&mut z).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn truth_matches_first_activity_and_graph() {
        let mut p = small(9);
        p.challenge_join_fraction = 0.6;
        let (d, truth) = generate(&p).unwrap();
        let first = first_activity(&d);
        for u in &truth.users {
            assert_eq!(first[&u.user_id], u.joined_at, "{}", u.user_id);
        }
        let g = build_graph(&d, &p.challenge_window(), false);
        let got: BTreeMap<(String, String), u64> =
            g.edges().map(|(a, b, w)| ((a.to_string(), b.to_string()), w)).collect();
        assert_eq!(got, truth.edges);
        assert_eq!(truth.totals.challenge_users + truth.totals.regular_users, 400);
    }

    #[test]
    fn class_counts_inside_multinomial_band() {
        let (_, truth) = generate(&SynthParams::standard(11, 10_000)).unwrap();
        let n: f64 = 10_000.0;
        for (c, &p) in [0.58f64, 0.25, 0.12, 0.05].iter().enumerate() {
            let band = 2.576 * (n * p * (1.0 - p)).sqrt();
            let got = truth.totals.class_counts[c] as f64;
            assert!((got - n * p).abs() <= band, "class {c}: {got}");
        }
    }

    #[test]
    fn dropout_is_geometric() {
        let mut p = small(5);
        p.n_users = 1000;
        p.max_months = 60;
        let (_, truth) = generate(&p).unwrap();
        // Kolmogorov-Smirnov distance against P(D <= m) = 1 - 0.5^(m+1)
        let n = truth.users.len() as f64;
        let mut ks: f64 = 0.0;
        for m in 0..20 {
            let emp = truth.users.iter().filter(|u| u.dropout_month <= m).count() as f64 / n;
            ks = ks.max((emp - (1.0 - 0.5f64.powi(m as i32 + 1))).abs());
        }
        assert!(ks < 1.63 / n.sqrt(), "ks {ks}");
    }

    #[test]
    fn infeasible_and_invalid_params() {
        let mut p = small(1);
        p.n_users = 1;
        p.activity[0].ids_median = 5.0;
        p.activity[1].ids_median = 5.0;
        p.activity[2].ids_median = 5.0;
        p.activity[3].ids_median = 5.0;
        assert!(matches!(generate(&p), Err(SynthError::Infeasible(_))));
        let mut q = small(1);
        q.class_mixture = [0.5, 0.5, 0.1, 0.0];
        assert!(matches!(generate(&q), Err(SynthError::InvalidParams(_))));
    }

    #[test]
    fn params_round_trip_through_toml() {
        let p = small(8);
        assert_eq!(SynthParams::from_toml_str(&p.to_toml_string()).unwrap(), p);
    }

    #[test]
    fn dispersal_plants_growing_blocks() {
        let grid = GridSpec::new(BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(), 4, 4).unwrap();
        let d = planted_dispersal(2, "t1", 2018, 3, 5, &grid).unwrap();
        assert_eq!(d.observations().len(), 5 * (1 + 4 + 9));
        assert_eq!(d.challenges().len(), 3);
        assert!(planted_dispersal(2, "t1", 2018, 5, 5, &grid).is_err());
    }
}
