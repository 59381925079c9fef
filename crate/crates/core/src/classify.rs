//! k-means classification of users in (observations, identifications) space.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ChallengeKey, Dataset};
use crate::stats::{aggregate_activity, UserActivity};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k range [{0}, {1}] is too narrow for a second difference")]
    RangeTooNarrow(usize, usize),
    #[error("labeling needs exactly 4 clusters, model has {0}")]
    NotFourClusters(usize),
    #[error("non-finite coordinate for user {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityPoint {
    pub user_id: String,
    pub x: f64,
    pub y: f64,
}

impl ActivityPoint {
    pub fn new(user_id: impl Into<String>, x: f64, y: f64) -> Self {
        Self { user_id: user_id.into(), x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureTransform {
    /// `log1p` on both counts, then z-scores within the point set.
    #[default]
    Log1pZScore,
    Raw,
}

/// Feature points for one challenge's activity rows, in row order.
pub fn activity_points(activities: &[UserActivity], transform: FeatureTransform) -> Vec<ActivityPoint> {
    let raw = activities.iter().map(|a| (a.n_observations as f64, a.n_identifications as f64));
    match transform {
        FeatureTransform::Raw => {
            raw.zip(activities).map(|((x, y), a)| ActivityPoint::new(a.user_id.clone(), x, y)).collect()
        }
        FeatureTransform::Log1pZScore => {
            let logged: Vec<(f64, f64)> = raw.map(|(x, y)| (x.ln_1p(), y.ln_1p())).collect();
            let xs = zscore(logged.iter().map(|p| p.0).collect());
            let ys = zscore(logged.iter().map(|p| p.1).collect());
            activities
                .iter()
                .zip(xs.into_iter().zip(ys))
                .map(|(a, (x, y))| ActivityPoint::new(a.user_id.clone(), x, y))
                .collect()
        }
    }
}

// population standard deviation; a constant column is only centred
fn zscore(v: Vec<f64>) -> Vec<f64> {
    if v.is_empty() {
        return v;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    v.into_iter().map(|x| (x - mean) / sd).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<[f64; 2]>,
    /// Cluster index per input point, in input order.
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-10 }
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Nearest centroid, ties to the lowest index.
fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, dist2(p, centroids[0]));
    for (c, &q) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, q);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn coords(points: &[ActivityPoint]) -> Result<Vec<[f64; 2]>, ClassifyError> {
    points
        .iter()
        .map(|p| {
            if p.x.is_finite() && p.y.is_finite() {
                Ok([p.x, p.y])
            } else {
                Err(ClassifyError::NonFinite(p.user_id.clone()))
            }
        })
        .collect()
}

fn plus_plus_init(pts: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = vec![pts[rng.gen_range(0..pts.len())]];
    let mut d2: Vec<f64> = pts.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = pts.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            // guard against rounding landing on a zero-weight tail
            while d2[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            pick
        } else {
            rng.gen_range(0..pts.len())
        };
        let c = pts[pick];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(pts) {
            *d = d.min(dist2(p, c));
        }
    }
    centroids
}

fn lloyd(pts: &[[f64; 2]], mut centroids: Vec<[f64; 2]>, opts: KMeansOptions) -> ClusterModel {
    let k = centroids.len();
    let mut assignment = vec![0usize; pts.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut inertia = 0.0;
        let mut dists = Vec::with_capacity(pts.len());
        for (a, &p) in assignment.iter_mut().zip(pts) {
            let (c, d) = nearest(p, &centroids);
            *a = c;
            inertia += d;
            dists.push(d);
        }
        if let Some(&prev) = history.last() {
            debug_assert!(inertia <= prev + 1e-9 * f64::max(prev, 1.0), "inertia rose from {prev} to {inertia}");
        }
        history.push(inertia);

        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (&a, &p) in assignment.iter().zip(pts) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        let mut next: Vec<[f64; 2]> = (0..k)
            .map(|c| {
                if counts[c] > 0 {
                    [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64]
                } else {
                    centroids[c]
                }
            })
            .collect();
        // empty clusters take the points farthest from their centroids
        let mut taken = vec![false; pts.len()];
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..pts.len()).filter(|&i| !taken[i]).fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
            if let Some(i) = far {
                taken[i] = true;
                next[c] = pts[i];
            }
        }
        let movement = centroids.iter().zip(&next).map(|(&a, &b)| dist2(a, b).sqrt()).fold(0.0, f64::max);
        centroids = next;
        if movement <= opts.tol {
            break;
        }
    }
    let mut inertia = 0.0;
    for (a, &p) in assignment.iter_mut().zip(pts) {
        let (c, d) = nearest(p, &centroids);
        *a = c;
        inertia += d;
    }
    ClusterModel { k, centroids, assignment, inertia, iterations, inertia_history: history }
}

fn run(pts: &[[f64; 2]], k: usize, seed: u64, stream: u64, opts: KMeansOptions) -> ClusterModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let init = plus_plus_init(pts, k, &mut rng);
    lloyd(pts, init, opts)
}

fn check(points: usize, k: usize) -> Result<(), ClassifyError> {
    if k == 0 {
        return Err(ClassifyError::ZeroK);
    }
    if points < k {
        return Err(ClassifyError::TooFewPoints { needed: k, got: points });
    }
    Ok(())
}

/// Lloyd iterations from a seeded k-means++ start.
pub fn kmeans(
    points: &[ActivityPoint],
    k: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<ClusterModel, ClassifyError> {
    check(points.len(), k)?;
    Ok(run(&coords(points)?, k, seed, 0, opts))
}

/// Lloyd iterations from the given centroids.
pub fn kmeans_from_init(
    points: &[ActivityPoint],
    init: Vec<[f64; 2]>,
    opts: KMeansOptions,
) -> Result<ClusterModel, ClassifyError> {
    check(points.len(), init.len())?;
    Ok(lloyd(&coords(points)?, init, opts))
}

/// Lowest-inertia model over `restarts` seeded runs (one independent random
/// stream per restart). The earliest run wins ties.
pub fn kmeans_best_of(
    points: &[ActivityPoint],
    k: usize,
    seed: u64,
    restarts: usize,
    opts: KMeansOptions,
) -> Result<ClusterModel, ClassifyError> {
    check(points.len(), k)?;
    let pts = coords(points)?;
    Ok(best_of(&pts, k, seed, restarts, opts))
}

fn best_of(pts: &[[f64; 2]], k: usize, seed: u64, restarts: usize, opts: KMeansOptions) -> ClusterModel {
    (0..restarts.max(1) as u64)
        .map(|r| run(pts, k, seed, r, opts))
        .reduce(|best, m| if m.inertia < best.inertia { m } else { best })
        .expect("at least one restart")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowCurve {
    pub k_min: usize,
    /// `wcss[i]` is WCSS at `k_min + i`.
    pub wcss: Vec<f64>,
    pub chosen_k: usize,
    /// Second difference at the chosen k relative to WCSS(k - 1).
    pub strength: f64,
    #[serde(skip)]
    pub models: Vec<ClusterModel>,
}

impl ElbowCurve {
    pub fn k_values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.wcss.iter().enumerate().map(|(i, &w)| (self.k_min + i, w))
    }

    pub fn model(&self, k: usize) -> Option<&ClusterModel> {
        k.checked_sub(self.k_min).and_then(|i| self.models.get(i))
    }
}

/// WCSS over `k_min..=k_max` and the k with the largest second difference.
///
/// Each k also gets a run started from the best (k-1) centroids plus the point
/// farthest from them, which keeps the curve nonincreasing.
pub fn elbow(
    points: &[ActivityPoint],
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
    opts: KMeansOptions,
) -> Result<ElbowCurve, ClassifyError> {
    if k_min == 0 {
        return Err(ClassifyError::ZeroK);
    }
    if k_max < k_min + 2 {
        return Err(ClassifyError::RangeTooNarrow(k_min, k_max));
    }
    check(points.len(), k_max)?;
    let pts = coords(points)?;
    let mut models: Vec<ClusterModel> = Vec::new();
    for k in k_min..=k_max {
        let mut best = best_of(&pts, k, seed, restarts, opts);
        if let Some(prev) = models.last() {
            let far = pts
                .iter()
                .enumerate()
                .map(|(i, &p)| (i, nearest(p, &prev.centroids).1))
                .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
                .0;
            let mut init = prev.centroids.clone();
            init.push(pts[far]);
            let nested = lloyd(&pts, init, opts);
            if nested.inertia < best.inertia {
                best = nested;
            }
        }
        models.push(best);
    }
    let wcss: Vec<f64> = models.iter().map(|m| m.inertia).collect();
    let (mut chosen, mut best_d2) = (k_min + 1, f64::NEG_INFINITY);
    for i in 1..wcss.len() - 1 {
        let d2 = wcss[i - 1] - 2.0 * wcss[i] + wcss[i + 1];
        if d2 > best_d2 {
            best_d2 = d2;
            chosen = k_min + i;
        }
    }
    let before = wcss[chosen - k_min - 1];
    let strength = if before > 0.0 { best_d2 / before } else { 0.0 };
    Ok(ElbowCurve { k_min, wcss, chosen_k: chosen, strength, models })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserClass {
    LowActivity,
    Observer,
    Identifier,
    HighActivity,
}

impl UserClass {
    pub const ALL: [UserClass; 4] = [Self::LowActivity, Self::Observer, Self::Identifier, Self::HighActivity];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LowActivity => "low_activity",
            Self::Observer => "observer",
            Self::Identifier => "identifier",
            Self::HighActivity => "high_activity",
        }
    }

    /// +1 / -1 side of the centroid mean on each axis.
    fn signs(self) -> (f64, f64) {
        match self {
            Self::LowActivity => (-1.0, -1.0),
            Self::Observer => (1.0, -1.0),
            Self::Identifier => (-1.0, 1.0),
            Self::HighActivity => (1.0, 1.0),
        }
    }

    fn of_quadrant(high_x: bool, high_y: bool) -> Self {
        match (high_x, high_y) {
            (false, false) => Self::LowActivity,
            (true, false) => Self::Observer,
            (false, true) => Self::Identifier,
            (true, true) => Self::HighActivity,
        }
    }
}

impl fmt::Display for UserClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown class {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Labeling {
    /// Class per cluster index.
    pub classes: Vec<UserClass>,
    pub warnings: Vec<String>,
}

/// Names the four clusters by their quadrant around the mean centroid.
///
/// When two centroids share a quadrant the labeling maximizes the total signed
/// margin from the mean across all four, and a warning is recorded.
pub fn label_clusters(model: &ClusterModel) -> Result<Labeling, ClassifyError> {
    if model.k != 4 || model.centroids.len() != 4 {
        return Err(ClassifyError::NotFourClusters(model.k));
    }
    let c = &model.centroids;
    let mx = c.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let my = c.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    let direct: Vec<UserClass> = c.iter().map(|p| UserClass::of_quadrant(p[0] >= mx, p[1] >= my)).collect();
    let mut distinct = direct.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.len() == 4 {
        return Ok(Labeling { classes: direct, warnings: vec![] });
    }

    let mut best: Option<(f64, Vec<UserClass>)> = None;
    for perm in permutations4() {
        let classes: Vec<UserClass> = perm.iter().map(|&i| UserClass::ALL[i]).collect();
        let score: f64 = classes
            .iter()
            .zip(c)
            .map(|(cls, p)| {
                let (sx, sy) = cls.signs();
                sx * (p[0] - mx) + sy * (p[1] - my)
            })
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, classes));
        }
    }
    let classes = best.expect("24 permutations").1;
    let warnings = direct
        .iter()
        .zip(&classes)
        .enumerate()
        .filter(|(_, (d, l))| d != l)
        .map(|(i, (d, l))| format!("cluster {i} sits in the {d} quadrant but was labeled {l} (shared quadrant)"))
        .collect();
    Ok(Labeling { classes, warnings })
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in (0..4).filter(|&b| b != a) {
            for c in (0..4).filter(|&c| c != a && c != b) {
                out.push([a, b, c, 6 - a - b - c]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Fixed cluster count; `None` takes the elbow choice.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub restarts: usize,
    pub transform: FeatureTransform,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let opts = KMeansOptions::default();
        Self {
            k: Some(4),
            k_min: 1,
            k_max: 8,
            seed: 42,
            restarts: 10,
            transform: FeatureTransform::default(),
            max_iter: opts.max_iter,
            tol: opts.tol,
        }
    }
}

impl ClassifyConfig {
    pub fn options(&self) -> KMeansOptions {
        KMeansOptions { max_iter: self.max_iter, tol: self.tol }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeClassification {
    pub challenge: ChallengeKey,
    pub activities: Vec<UserActivity>,
    pub points: Vec<ActivityPoint>,
    pub model: ClusterModel,
    /// Present when the model has four clusters.
    pub labeling: Option<Labeling>,
    /// Absent when there are fewer users than `k_max`.
    pub elbow: Option<ElbowCurve>,
}

impl ChallengeClassification {
    pub fn class_of(&self, row: usize) -> Option<UserClass> {
        self.labeling.as_ref().map(|l| l.classes[self.model.assignment[row]])
    }

    /// Share of users per class, in [`UserClass::ALL`] order.
    pub fn class_shares(&self) -> Option<[f64; 4]> {
        let labeling = self.labeling.as_ref()?;
        let mut counts = [0usize; 4];
        for &a in &self.model.assignment {
            counts[labeling.classes[a] as usize] += 1;
        }
        let n = self.model.assignment.len() as f64;
        Some(counts.map(|c| c as f64 / n))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationRun {
    pub results: Vec<ChallengeClassification>,
    pub skipped: Vec<(ChallengeKey, String)>,
}

/// Clusters each challenge's active users independently, challenges in parallel.
pub fn classify_per_challenge(dataset: &Dataset, config: &ClassifyConfig) -> ClassificationRun {
    let outcomes: Vec<Result<ChallengeClassification, (ChallengeKey, String)>> = dataset
        .sorted_challenges()
        .into_par_iter()
        .map(|w| {
            let acts = aggregate_activity(dataset, w).expect("window comes from the dataset");
            classify_activities(w.key(), acts, config).map_err(|e| (w.key(), e.to_string()))
        })
        .collect();
    let mut run = ClassificationRun::default();
    for o in outcomes {
        match o {
            Ok(c) => run.results.push(c),
            Err(s) => run.skipped.push(s),
        }
    }
    run
}

/// Clustering and labeling for one challenge's activity rows.
pub fn classify_activities(
    challenge: ChallengeKey,
    activities: Vec<UserActivity>,
    config: &ClassifyConfig,
) -> Result<ChallengeClassification, ClassifyError> {
    let points = activity_points(&activities, config.transform);
    let opts = config.options();
    let elbow = if points.len() >= config.k_max {
        Some(elbow(&points, config.k_min, config.k_max, config.seed, config.restarts, opts)?)
    } else {
        None
    };
    let k = match (config.k, &elbow) {
        (Some(k), _) => k,
        (None, Some(e)) => e.chosen_k,
        (None, None) => return Err(ClassifyError::TooFewPoints { needed: config.k_max, got: points.len() }),
    };
    let model = match elbow.as_ref().and_then(|e| e.model(k)) {
        Some(m) => m.clone(),
        None => kmeans_best_of(&points, k, config.seed, config.restarts, opts)?,
    };
    let labeling = if k == 4 { Some(label_clusters(&model)?) } else { None };
    Ok(ChallengeClassification { challenge, activities, points, model, labeling, elbow })
}
