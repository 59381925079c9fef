//! Plot-ready tables for every analysis and the composed Markdown summary.
//!
//! Each stage writes its files through an [`OutputTree`] and appends a section
//! to the summary. Every file is a pure function of the dataset and options.

mod svg;
mod tables;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::attrition::{all_retention_curves, next_year_participation, ActivityKind, DEFAULT_HORIZON};
use crate::classify::{classify_per_challenge, ClassificationRun, ClassifyConfig, UserClass};
use crate::data::{ChallengeKey, ChallengeWindow, Dataset, LatLon};
use crate::geo::{greenspace_fraction, quadrant_count, species_spread, spread_metric, GridSpec, PolygonLayer};
use crate::network::{
    build_graph, centralities, per_class_summary, unweighted_degree, write_edge_csv, write_graph_json,
};
use crate::network::{CentralityScores, InteractionGraph, PowerOptions};
use crate::stats::{aggregate_activity, lorenz, observation_histogram, per_city_year_trends, top_share, UserActivity};

pub use tables::{fmt_f64, CsvTable};

/// Fractions of the most active users whose share of observations is reported.
pub const TOP_FRACTIONS: [(i64, i64); 4] = [(1, 2), (1, 5), (1, 10), (1, 100)];

/// Values observed on the full multi-year pull, used only by the opt-in
/// replication check. None of them is reachable on a desk-scale sample.
pub const REFERENCE_TARGETS: &[(&str, f64)] = &[
    ("share_users_one_observation", 0.346),
    ("share_users_one_to_five_observations", 0.627),
    ("top_50pct_share", 0.97),
    ("top_20pct_share", 0.80),
    ("top_10pct_share", 0.77),
    ("top_1pct_share", 0.41),
    ("class_low_activity", 0.58),
    ("class_observer", 0.25),
    ("class_identifier", 0.12),
    ("class_high_activity", 0.05),
    ("next_year_return_min", 0.15),
    ("next_year_return_max", 0.20),
    ("london_2020_non_green", 0.75),
];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Data(String),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub nx: usize,
    pub ny: usize,
    /// Taxa with fewer located observations in a year are left out of the spread table.
    pub species_min_count: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { nx: 20, ny: 20, species_min_count: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub classify: ClassifyConfig,
    pub horizon: usize,
    pub activity: ActivityKind,
    pub grid: GridOptions,
    pub layer: Option<PolygonLayer>,
    pub include_isolated: bool,
    /// Adds an `x_d_unweighted` (link count) column to the centrality table.
    pub unweighted_degree: bool,
    pub power: PowerOptions,
    /// Challenge whose graph goes to `graph.csv` / `graph.json`; defaults to
    /// the one with the largest total weight.
    pub graph_challenge: Option<ChallengeKey>,
    pub svg: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            classify: ClassifyConfig::default(),
            horizon: DEFAULT_HORIZON,
            activity: ActivityKind::All,
            grid: GridOptions::default(),
            layer: None,
            include_isolated: false,
            unweighted_degree: false,
            power: PowerOptions::default(),
            graph_challenge: None,
            svg: false,
        }
    }
}

/// Collects written files, warnings and summary sections for one run.
#[derive(Debug)]
pub struct OutputTree {
    root: PathBuf,
    files: Vec<String>,
    pub warnings: Vec<String>,
    sections: Vec<String>,
    /// Also write SVG charts next to the tables.
    pub svg: bool,
}

impl OutputTree {
    pub fn create(root: &Path) -> Result<Self, ReportError> {
        fs::create_dir_all(root).map_err(|source| ReportError::Io { path: root.to_path_buf(), source })?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new(), warnings: Vec::new(), sections: Vec::new(), svg: false })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Relative names of the files written so far, in write order.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), ReportError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|source| ReportError::Io { path, source })?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn table(&mut self, name: &str, table: CsvTable) -> Result<(), ReportError> {
        let bytes = table.into_bytes()?;
        self.write(name, &bytes)
    }

    fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    fn section(&mut self, text: String) {
        self.sections.push(text);
    }

    /// Writes `report.md` from the sections gathered so far.
    pub fn write_summary(&mut self, dataset: &Dataset) -> Result<(), ReportError> {
        let mut md = String::from("# Participation report\n\n");
        let users: std::collections::BTreeSet<&str> = dataset
            .observations()
            .iter()
            .map(|o| o.observer_id.as_str())
            .chain(dataset.identifications().iter().map(|i| i.identifier_id.as_str()))
            .collect();
        let _ = writeln!(md, "| records | count |\n|---|---|");
        let _ = writeln!(md, "| observations | {} |", dataset.observations().len());
        let _ = writeln!(md, "| identifications | {} |", dataset.identifications().len());
        let _ = writeln!(md, "| orphan identifications | {} |", dataset.orphan_identifications().len());
        let _ = writeln!(md, "| users | {} |", users.len());
        let _ = writeln!(md, "| challenges | {} |\n", dataset.challenges().len());
        for s in &self.sections {
            md.push_str(s);
            md.push('\n');
        }
        if !self.warnings.is_empty() {
            md.push_str("## Warnings\n\n");
            for w in &self.warnings {
                let _ = writeln!(md, "- {w}");
            }
        }
        self.write("report.md", md.as_bytes())
    }
}

fn windows(dataset: &Dataset) -> Result<Vec<&ChallengeWindow>, ReportError> {
    let w = dataset.sorted_challenges();
    if w.is_empty() {
        return Err(ReportError::Data("no challenge windows configured".into()));
    }
    Ok(w)
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn ratio(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Share of `rows` whose observation count lies in `lo..=hi`.
fn count_share(rows: &[UserActivity], lo: u64, hi: u64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| (lo..=hi).contains(&r.n_observations)).count() as f64 / rows.len() as f64
}

/// Headline numbers from the stats stage, also used by the replication check.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatsSummary {
    pub n_rows: usize,
    pub share_one: f64,
    pub share_one_to_five: f64,
    pub top_shares: Vec<(String, f64)>,
    pub max_per_challenge: u64,
}

/// Contribution histogram, Lorenz curve and per-city-year trends.
pub fn stats_stage(dataset: &Dataset, out: &mut OutputTree) -> Result<StatsSummary, ReportError> {
    // a user active in several challenges counts once per challenge
    let mut rows = Vec::new();
    for w in windows(dataset)? {
        rows.extend(aggregate_activity(dataset, w).map_err(|e| ReportError::Internal(e.to_string()))?);
    }
    let contributors: Vec<UserActivity> = rows.iter().filter(|r| r.n_observations > 0).cloned().collect();

    let mut hist = CsvTable::new(&["count", "n_users"]);
    for (count, n) in observation_histogram(&contributors) {
        hist.row([count.to_string(), n.to_string()]);
    }
    out.table("fig1a_histogram.csv", hist)?;

    let mut curve = CsvTable::new(&["user_fraction", "obs_fraction"]);
    let mut summary = StatsSummary {
        n_rows: contributors.len(),
        share_one: count_share(&contributors, 1, 1),
        share_one_to_five: count_share(&contributors, 1, 5),
        max_per_challenge: contributors.iter().map(|r| r.n_observations).max().unwrap_or(0),
        ..StatsSummary::default()
    };
    let mut lorenz_points = Vec::new();
    match lorenz(&contributors) {
        Ok(l) => {
            lorenz_points = l.points_f64();
            for &(u, o) in &lorenz_points {
                curve.row([fmt_f64(u), fmt_f64(o)]);
            }
            for (n, d) in TOP_FRACTIONS {
                let share = top_share(&contributors, Rational64::new(n, d))
                    .map_err(|e| ReportError::Internal(e.to_string()))?;
                summary.top_shares.push((format!("{}%", 100 * n / d), ratio(share)));
            }
        }
        Err(e) => out.warn(format!("lorenz curve: {e}")),
    }
    out.table("fig1b_lorenz.csv", curve)?;
    if out.svg && !lorenz_points.is_empty() {
        let chart = svg::line_chart(
            "Cumulative share of observations",
            "user fraction",
            "observation fraction",
            &[("all challenges".to_string(), lorenz_points)],
        );
        out.write("fig1b_lorenz.svg", chart.as_bytes())?;
    }

    let trends = per_city_year_trends(dataset);
    let header = ["city", "year", "n_obs", "n_users", "mean"];
    let (mut active, mut all) = (CsvTable::new(&header), CsvTable::new(&header));
    for r in &trends.rows {
        active.row([
            r.city.clone(),
            r.year.to_string(),
            r.n_observations.to_string(),
            r.n_active_users.to_string(),
            fmt_f64(ratio(r.mean_active())),
        ]);
        all.row([
            r.city.clone(),
            r.year.to_string(),
            r.n_observations.to_string(),
            r.n_users.to_string(),
            fmt_f64(ratio(r.mean())),
        ]);
    }
    out.table("fig2_trends.csv", active)?;
    out.table("fig2_trends_all_users.csv", all)?;

    let mut md = String::from("## Contributions\n\n");
    let _ = writeln!(md, "Observing users, counted once per challenge: {}.\n", summary.n_rows);
    let _ = writeln!(md, "| measure | value |\n|---|---|");
    let _ = writeln!(md, "| users with exactly one observation | {} |", pct(summary.share_one));
    let _ = writeln!(md, "| users with one to five observations | {} |", pct(summary.share_one_to_five));
    for (label, share) in &summary.top_shares {
        let _ = writeln!(md, "| observations by the top {label} of users | {} |", pct(*share));
    }
    let _ = writeln!(md, "| most observations by one user in one challenge | {} |\n", summary.max_per_challenge);
    let _ = writeln!(md, "### Trends\n\n| city | year | observations | observing users | mean per observing user |\n|---|---|---|---|---|");
    for r in &trends.rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.2} |",
            r.city,
            r.year,
            r.n_observations,
            r.n_active_users,
            ratio(r.mean_active())
        );
    }
    out.section(md);
    Ok(summary)
}

/// Class per user for each classified challenge.
pub fn class_maps(run: &ClassificationRun) -> BTreeMap<ChallengeKey, BTreeMap<String, UserClass>> {
    run.results
        .iter()
        .map(|c| {
            let map = c
                .activities
                .iter()
                .enumerate()
                .filter_map(|(row, a)| c.class_of(row).map(|cl| (a.user_id.clone(), cl)))
                .collect();
            (c.challenge.clone(), map)
        })
        .collect()
}

/// Per-challenge k-means classification with elbow diagnostics.
pub fn classify_stage(
    dataset: &Dataset,
    config: &ClassifyConfig,
    out: &mut OutputTree,
) -> Result<ClassificationRun, ReportError> {
    windows(dataset)?;
    let run = classify_per_challenge(dataset, config);
    let mut classes = CsvTable::new(&["user_id", "city", "year", "n_obs", "n_ids", "cluster_index", "class_label"]);
    let mut elbow = CsvTable::new(&["city", "year", "k", "wcss", "chosen"]);
    let mut md = String::from("## User classes\n\n");
    let _ =
        writeln!(md, "| city | year | users | k | elbow k | low activity | observer | identifier | high activity |");
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|---|");
    let mut pooled = [0usize; 4];
    for c in &run.results {
        let (city, year) = (&c.challenge.city, c.challenge.year.to_string());
        for (row, a) in c.activities.iter().enumerate() {
            let label = c.class_of(row).map_or("", UserClass::as_str);
            classes.row([
                a.user_id.clone(),
                city.clone(),
                year.clone(),
                a.n_observations.to_string(),
                a.n_identifications.to_string(),
                c.model.assignment[row].to_string(),
                label.to_string(),
            ]);
            if let Some(cl) = c.class_of(row) {
                pooled[cl as usize] += 1;
            }
        }
        if let Some(e) = &c.elbow {
            for (k, w) in e.k_values() {
                elbow.row([city.clone(), year.clone(), k.to_string(), fmt_f64(w), (k == e.chosen_k).to_string()]);
            }
        }
        let shares = c.class_shares().map_or_else(|| vec!["-".to_string(); 4], |s| s.iter().map(|&x| pct(x)).collect());
        let _ = writeln!(
            md,
            "| {city} | {year} | {} | {} | {} | {} |",
            c.activities.len(),
            c.model.k,
            c.elbow.as_ref().map_or("-".to_string(), |e| e.chosen_k.to_string()),
            shares.join(" | ")
        );
        if let Some(l) = &c.labeling {
            for w in &l.warnings {
                out.warn(format!("{}: {w}", c.challenge));
            }
        }
        if out.svg {
            let pts: Vec<(f64, f64, usize)> =
                c.points.iter().zip(&c.model.assignment).map(|(p, &a)| (p.x, p.y, a)).collect();
            let chart = svg::scatter(
                &format!("{}", c.challenge),
                "observations (log1p, z)",
                "identifications (log1p, z)",
                &pts,
            );
            out.write(&format!("fig3_classes_{}_{year}.svg", svg::slug(city)), chart.as_bytes())?;
        }
    }
    let total: usize = pooled.iter().sum();
    if total > 0 {
        let _ = writeln!(
            md,
            "\nAll challenges: {}.",
            UserClass::ALL
                .iter()
                .map(|cl| format!("{} {}", cl.as_str(), pct(pooled[*cl as usize] as f64 / total as f64)))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    for (key, reason) in &run.skipped {
        out.warn(format!("{key}: not classified: {reason}"));
    }
    out.table("fig3_classes.csv", classes)?;
    out.table("fig3_elbow.csv", elbow)?;
    out.section(md);
    Ok(run)
}

/// Monthly retention for challenge and regular cohorts, plus next-year return.
pub fn attrition_stage(
    dataset: &Dataset,
    horizon: usize,
    kind: ActivityKind,
    out: &mut OutputTree,
) -> Result<(), ReportError> {
    let ws = windows(dataset)?;
    let curves = all_retention_curves(dataset, horizon, kind);
    let mut table = CsvTable::new(&["cohort_id", "month_index", "fraction", "cohort_size"]);
    let mut md = String::from("## Retention\n\n| cohort | size |");
    md.push_str(&(0..=horizon).map(|m| format!(" m{m} |")).collect::<String>());
    md.push_str("\n|---|---|");
    md.push_str(&"---|".repeat(horizon + 1));
    md.push('\n');
    let mut series = Vec::new();
    for c in &curves {
        for (m, v) in c.values().into_iter().enumerate() {
            table.row([c.cohort_id.to_string(), m.to_string(), fmt_f64(v), c.cohort_size.to_string()]);
        }
        let _ = write!(md, "| {} | {} |", c.cohort_id, c.cohort_size);
        for v in c.values() {
            let _ = write!(md, " {} |", pct(v));
        }
        md.push('\n');
        if c.cohort_size > 0 {
            series.push((
                c.cohort_id.to_string(),
                c.values().into_iter().enumerate().map(|(m, v)| (m as f64, v)).collect(),
            ));
        }
    }
    out.table("fig4_retention.csv", table)?;
    if out.svg && !series.is_empty() {
        let chart = svg::line_chart("Retention after joining", "months", "fraction active", &series);
        out.write("fig4_retention.svg", chart.as_bytes())?;
    }

    let mut returns = Vec::new();
    for a in &ws {
        if let Some(b) = ws.iter().find(|b| b.city == a.city && b.year == a.year + 1) {
            match next_year_participation(dataset, a, b) {
                Ok(share) => returns.push(format!("| {} | {} | {} |", a.city, a.year, pct(share))),
                Err(e) => out.warn(format!("{} next-year return: {e}", a.key())),
            }
        }
    }
    if !returns.is_empty() {
        md.push_str("\n| city | joined | returned next year |\n|---|---|---|\n");
        for r in returns {
            md.push_str(&r);
            md.push('\n');
        }
    }
    out.section(md);
    Ok(())
}

fn located(dataset: &Dataset, w: &ChallengeWindow) -> Vec<LatLon> {
    dataset.observations().iter().filter(|o| w.contains(o)).filter_map(|o| o.location).collect()
}

/// Grid for one challenge: the region's box when there is one, else the
/// box covering the located observations.
fn challenge_grid(w: &ChallengeWindow, points: &[LatLon], grid: &GridOptions) -> Option<GridSpec> {
    match &w.region {
        Some(r) => GridSpec::new(r.bbox(), grid.nx, grid.ny).ok(),
        None => GridSpec::covering(points, grid.nx, grid.ny).and_then(Result::ok),
    }
}

/// Quadrant counts, spread metrics and, with a layer, greenspace fractions.
pub fn geo_stage(
    dataset: &Dataset,
    grid: &GridOptions,
    layer: Option<&PolygonLayer>,
    out: &mut OutputTree,
) -> Result<(), ReportError> {
    let ws = windows(dataset)?;
    let mut quads = CsvTable::new(&["city", "year", "i", "j", "count"]);
    let mut grids = CsvTable::new(&[
        "city",
        "year",
        "min_lat",
        "min_lon",
        "max_lat",
        "max_lon",
        "nx",
        "ny",
        "n_located",
        "out_of_bbox",
        "entropy",
        "mean_radial_m",
    ]);
    let mut species = CsvTable::new(&["city", "year", "taxon_id", "n_points", "entropy", "mean_radial_m"]);
    let mut md = String::from("## Spatial spread\n\n| city | year | located | outside grid | entropy (nats) | mean radial distance (m) |\n|---|---|---|---|---|---|\n");
    for w in &ws {
        let points = located(dataset, w);
        let Some(spec) = challenge_grid(w, &points, grid) else {
            out.warn(format!("{}: no located observations, no quadrant grid", w.key()));
            continue;
        };
        let q = quadrant_count(&points, &spec);
        let (city, year) = (w.city.clone(), w.year.to_string());
        for (i, j, c) in q.cells() {
            quads.row([city.clone(), year.clone(), i.to_string(), j.to_string(), c.to_string()]);
        }
        let metric = spread_metric(&points, &spec).ok();
        let b = spec.bbox;
        grids.row([
            city.clone(),
            year.clone(),
            fmt_f64(b.min_lat),
            fmt_f64(b.min_lon),
            fmt_f64(b.max_lat),
            fmt_f64(b.max_lon),
            spec.nx.to_string(),
            spec.ny.to_string(),
            points.len().to_string(),
            q.out_of_bbox.to_string(),
            metric.map_or(String::new(), |m| fmt_f64(m.entropy)),
            metric.map_or(String::new(), |m| fmt_f64(m.mean_radial)),
        ]);
        let _ = writeln!(
            md,
            "| {city} | {year} | {} | {} | {} | {} |",
            points.len(),
            q.out_of_bbox,
            metric.map_or("-".to_string(), |m| format!("{:.3}", m.entropy)),
            metric.map_or("-".to_string(), |m| format!("{:.0}", m.mean_radial)),
        );
        for s in species_spread(dataset, &spec, std::slice::from_ref(*w), grid.species_min_count) {
            species.row([
                city.clone(),
                year.clone(),
                s.taxon_id,
                s.metric.n_points.to_string(),
                fmt_f64(s.metric.entropy),
                fmt_f64(s.metric.mean_radial),
            ]);
        }
    }
    out.table("fig5_quadrants.csv", quads)?;
    out.table("fig5_grids.csv", grids)?;
    out.table("fig6_species_spread.csv", species)?;

    if let Some(layer) = layer {
        let mut green = CsvTable::new(&["city", "year", "fraction", "n_located", "n_unlocated"]);
        md.push_str("\n| city | year | in greenspace | located | unlocated |\n|---|---|---|---|---|\n");
        for w in &ws {
            match greenspace_fraction(dataset, layer, w) {
                Ok(g) => {
                    green.row([
                        g.city.clone(),
                        g.year.to_string(),
                        fmt_f64(g.fraction),
                        g.n_located.to_string(),
                        g.n_unlocated.to_string(),
                    ]);
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | {} |",
                        g.city,
                        g.year,
                        pct(g.fraction),
                        g.n_located,
                        g.n_unlocated
                    );
                }
                Err(e) => out.warn(format!("{} greenspace: {e}", w.key())),
            }
        }
        out.table("fig7_greenspace.csv", green)?;
    }
    out.section(md);
    Ok(())
}

/// Interaction graphs, centralities per class and the exported graph.
pub fn network_stage(
    dataset: &Dataset,
    options: &ReportOptions,
    classes: &BTreeMap<ChallengeKey, BTreeMap<String, UserClass>>,
    out: &mut OutputTree,
) -> Result<(), ReportError> {
    let ws = windows(dataset)?;
    let empty = BTreeMap::new();
    let mut cent = if options.unweighted_degree {
        CsvTable::new(&["city", "year", "user_id", "class", "x_d", "x_d_unweighted", "x_e"])
    } else {
        CsvTable::new(&["city", "year", "user_id", "class", "x_d", "x_e"])
    };
    let mut summary = CsvTable::new(&["city", "year", "class", "count", "median_x_d", "median_x_e"]);
    let mut md = String::from("## Interaction network\n\n| city | year | users | links | total weight | components |\n|---|---|---|---|---|---|\n");
    let mut medians = String::new();
    let mut graphs: Vec<(ChallengeKey, InteractionGraph, CentralityScores)> = Vec::new();
    for w in &ws {
        let key = w.key();
        let g = build_graph(dataset, w, options.include_isolated);
        let comps = crate::network::connected_components(&g);
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} |",
            w.city,
            w.year,
            g.nodes().len(),
            g.edge_count(),
            g.total_weight(),
            comps.len()
        );
        if g.edge_count() == 0 {
            out.warn(format!("{key}: no interactions, centrality skipped"));
            continue;
        }
        let scores = match centralities(&g, options.power) {
            Ok(s) => s,
            Err(e) => {
                out.warn(format!("{key}: eigenvector centrality: {e}"));
                continue;
            }
        };
        let cls = classes.get(&key).unwrap_or(&empty);
        let unweighted = options.unweighted_degree.then(|| unweighted_degree(&g));
        for (user, &d) in &scores.x_d {
            let mut row = vec![
                w.city.clone(),
                w.year.to_string(),
                user.clone(),
                cls.get(user).map_or("", |c| c.as_str()).to_string(),
                d.to_string(),
            ];
            if let Some(u) = &unweighted {
                row.push(u.get(user).copied().unwrap_or(0).to_string());
            }
            row.push(fmt_f64(scores.x_e.get(user).copied().unwrap_or(0.0)));
            cent.row(row);
        }
        for (class, s) in per_class_summary(&scores, cls).groups {
            let label = class.map_or("unclassified", UserClass::as_str);
            summary.row([
                w.city.clone(),
                w.year.to_string(),
                label.to_string(),
                s.count.to_string(),
                fmt_f64(s.median_x_d),
                fmt_f64(s.median_x_e),
            ]);
            let _ = writeln!(
                medians,
                "| {} | {} | {label} | {} | {} | {:.4} |",
                w.city, w.year, s.count, s.median_x_d, s.median_x_e
            );
        }
        graphs.push((key, g, scores));
    }
    out.table("fig9_centrality.csv", cent)?;
    out.table("fig9_summary.csv", summary)?;
    if !medians.is_empty() {
        md.push_str("\n| city | year | class | users | median x_d | median x_e |\n|---|---|---|---|---|---|\n");
        md.push_str(&medians);
    }

    let chosen = match &options.graph_challenge {
        Some(k) => graphs.iter().find(|(key, ..)| key == k).or_else(|| {
            out.warn(format!("{k}: requested graph has no centralities, graph export skipped"));
            None
        }),
        // largest total weight, first challenge on ties
        None => graphs.iter().rev().max_by_key(|(_, g, _)| g.total_weight()),
    };
    if let Some((key, g, scores)) = chosen {
        let cls = classes.get(key).unwrap_or(&empty);
        let mut csv_bytes = Vec::new();
        write_edge_csv(g, &mut csv_bytes).map_err(|e| ReportError::Internal(e.to_string()))?;
        out.write("graph.csv", &csv_bytes)?;
        let mut json_bytes = Vec::new();
        write_graph_json(g, scores, cls, &mut json_bytes).map_err(|e| ReportError::Internal(e.to_string()))?;
        out.write("graph.json", &json_bytes)?;
        let _ = writeln!(md, "\nExported graph: {key}.");
    }
    out.section(md);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub stats: StatsSummary,
    pub classes: ClassificationRun,
}

/// Everything: stats, classes, retention, spatial spread and the network,
/// then `report.md`.
pub fn run_report(
    dataset: &Dataset,
    options: &ReportOptions,
    out: &mut OutputTree,
) -> Result<ReportOutcome, ReportError> {
    out.svg |= options.svg;
    let stats = stats_stage(dataset, out)?;
    let run = classify_stage(dataset, &options.classify, out)?;
    attrition_stage(dataset, options.horizon, options.activity, out)?;
    geo_stage(dataset, &options.grid, options.layer.as_ref(), out)?;
    network_stage(dataset, options, &class_maps(&run), out)?;
    out.write_summary(dataset)?;
    Ok(ReportOutcome { stats, classes: run })
}
