//! Undirected weighted user-interaction graph and its centralities.
//!
//! An edge {A, B} gains one unit of weight each time B identifies an
//! observation A made inside the challenge window (or the reverse).

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classify::UserClass;
use crate::data::{ChallengeWindow, Dataset};
use crate::stats::aggregate_activity;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InteractionGraph {
    nodes: BTreeSet<String>,
    /// Keyed by `(a, b)` with `a < b`.
    edges: BTreeMap<(String, String), u64>,
}

impl InteractionGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, user: &str) {
        if !self.nodes.contains(user) {
            self.nodes.insert(user.to_string());
        }
    }

    /// Adds `weight` to edge {a, b}.
    pub fn add_interaction(&mut self, a: &str, b: &str, weight: u64) -> Result<(), NetworkError> {
        if a == b {
            return Err(NetworkError::InvalidEdge(format!("self-loop on {a}")));
        }
        if weight == 0 {
            return Err(NetworkError::InvalidEdge(format!("zero weight on {a}-{b}")));
        }
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.add_node(a);
        self.add_node(b);
        *self.edges.entry(key).or_insert(0) += weight;
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.edges.iter().map(|((a, b), &w)| (a.as_str(), b.as_str(), w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<u64> {
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.edges.get(&key).copied()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Neighbours with edge weights, by neighbour id.
    pub fn adjacency(&self) -> BTreeMap<&str, Vec<(&str, u64)>> {
        let mut adj: BTreeMap<&str, Vec<(&str, u64)>> = self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (a, b, w) in self.edges() {
            adj.get_mut(a).expect("edge endpoint is a node").push((b, w));
            adj.get_mut(b).expect("edge endpoint is a node").push((a, w));
        }
        for v in adj.values_mut() {
            v.sort_unstable();
        }
        adj
    }
}

pub fn build_graph(dataset: &Dataset, window: &ChallengeWindow, include_isolated: bool) -> InteractionGraph {
    let observer_of: HashMap<&str, &str> = dataset
        .observations()
        .iter()
        .filter(|o| window.contains(o))
        .map(|o| (o.id.as_str(), o.observer_id.as_str()))
        .collect();
    let mut g = InteractionGraph::new();
    for i in dataset.identifications() {
        if let Some(&observer) = observer_of.get(i.observation_id.as_str()) {
            if observer != i.identifier_id {
                g.add_interaction(observer, &i.identifier_id, 1).expect("distinct endpoints, unit weight");
            }
        }
    }
    if include_isolated {
        if let Ok(rows) = aggregate_activity(dataset, window) {
            for r in rows {
                g.add_node(&r.user_id);
            }
        }
    }
    g
}

/// Sum of incident edge weights per node.
pub fn degree_centrality(graph: &InteractionGraph) -> BTreeMap<String, u64> {
    let mut d: BTreeMap<String, u64> = graph.nodes.iter().map(|n| (n.clone(), 0)).collect();
    for (a, b, w) in graph.edges() {
        *d.get_mut(a).expect("node") += w;
        *d.get_mut(b).expect("node") += w;
    }
    d
}

/// Number of distinct neighbours per node.
pub fn unweighted_degree(graph: &InteractionGraph) -> BTreeMap<String, u64> {
    let mut d: BTreeMap<String, u64> = graph.nodes.iter().map(|n| (n.clone(), 0)).collect();
    for (a, b, _) in graph.edges() {
        *d.get_mut(a).expect("node") += 1;
        *d.get_mut(b).expect("node") += 1;
    }
    d
}

/// Components ordered by size (descending), then by smallest member.
pub fn connected_components(graph: &InteractionGraph) -> Vec<BTreeSet<String>> {
    let adj = graph.adjacency();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut comps = Vec::new();
    for start in graph.nodes.iter().map(String::as_str) {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            comp.insert(v.to_string());
            for &(n, _) in &adj[v] {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        comps.push(comp);
    }
    comps.sort_by(|a: &BTreeSet<String>, b| b.len().cmp(&a.len()).then_with(|| a.first().cmp(&b.first())));
    comps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

const TAIL_MARGIN: f64 = 1e-2;

/// Dominant eigenvector of the weighted adjacency over the largest component,
/// unit norm and nonnegative; every other node scores 0.
///
/// Power iteration runs on `W / d + I`, with `d` the largest weighted degree,
/// which has the eigenvectors of `W`. It stops once the step `δ` (max-norm
/// change) and the geometric tail estimate `δ·r/(1-r)`, with `r` the ratio of
/// successive steps, are below `tol` and `tol / 100` respectively.
pub fn eigenvector_centrality(
    graph: &InteractionGraph,
    opts: PowerOptions,
) -> Result<BTreeMap<String, f64>, NetworkError> {
    if graph.edge_count() == 0 {
        return Err(NetworkError::EmptyGraph);
    }
    let comp = connected_components(graph).swap_remove(0);
    let index: HashMap<&str, usize> = comp.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let n = comp.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (a, b, w) in graph.edges() {
        if let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) {
            adj[i].push((j, w as f64));
            adj[j].push((i, w as f64));
        }
    }
    // dividing by the largest weighted degree bounds the spectrum to [-1, 1]
    let max_degree = adj.iter().map(|row| row.iter().map(|e| e.1).sum::<f64>()).fold(0.0, f64::max);
    for row in &mut adj {
        row.iter_mut().for_each(|e| e.1 /= max_degree);
    }

    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut prev_step = f64::INFINITY;
    let mut step = f64::INFINITY;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let mut y: Vec<f64> = x.clone();
        for (i, row) in adj.iter().enumerate() {
            y[i] += row.iter().map(|&(j, w)| w * x[j]).sum::<f64>();
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        step = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        let ratio = step / prev_step;
        let tail = if ratio < 1.0 { step * ratio / (1.0 - ratio) } else { f64::INFINITY };
        // margin so ratios of scores, not just the scores, are good to tol
        if step < 4.0 * f64::EPSILON || (step < opts.tol && tail < opts.tol * TAIL_MARGIN) {
            converged = true;
            break;
        }
        prev_step = step;
    }
    if !converged {
        return Err(NetworkError::NotConverged { iterations: opts.max_iter, residual: step });
    }
    let mut scores: BTreeMap<String, f64> = graph.nodes.iter().map(|n| (n.clone(), 0.0)).collect();
    for (name, i) in index {
        scores.insert(name.to_string(), x[i].max(0.0));
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityScores {
    pub x_d: BTreeMap<String, u64>,
    pub x_e: BTreeMap<String, f64>,
}

pub fn centralities(graph: &InteractionGraph, opts: PowerOptions) -> Result<CentralityScores, NetworkError> {
    Ok(CentralityScores { x_d: degree_centrality(graph), x_e: eigenvector_centrality(graph, opts)? })
}

/// Fixed-width bins over `log10` of the positive values; zeros are counted apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogHistogram {
    pub log10_start: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub zeros: u64,
}

pub const LOG_BIN_WIDTH: f64 = 0.25;

impl LogHistogram {
    fn layout(all: &[f64]) -> (f64, usize) {
        let logs: Vec<f64> = all.iter().filter(|v| **v > 0.0).map(|v| v.log10()).collect();
        let Some(lo) = logs.iter().copied().reduce(f64::min) else { return (0.0, 0) };
        let hi = logs.iter().copied().fold(lo, f64::max);
        let start = (lo / LOG_BIN_WIDTH).floor() * LOG_BIN_WIDTH;
        let bins = ((hi - start) / LOG_BIN_WIDTH).floor() as usize + 1;
        (start, bins)
    }

    fn fill(values: &[f64], start: f64, bins: usize) -> Self {
        let mut counts = vec![0u64; bins];
        let mut zeros = 0;
        for &v in values {
            if v > 0.0 {
                let b = ((v.log10() - start) / LOG_BIN_WIDTH).floor().max(0.0) as usize;
                counts[b.min(bins - 1)] += 1;
            } else {
                zeros += 1;
            }
        }
        Self { log10_start: start, bin_width: LOG_BIN_WIDTH, counts, zeros }
    }

    /// `[lower, upper)` of bin `b` in value units.
    pub fn bin_range(&self, b: usize) -> (f64, f64) {
        let lo = self.log10_start + b as f64 * self.bin_width;
        (10f64.powf(lo), 10f64.powf(lo + self.bin_width))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub count: usize,
    pub median_x_d: f64,
    pub median_x_e: f64,
    pub hist_x_d: LogHistogram,
    pub hist_x_e: LogHistogram,
}

/// Groups keyed by class; `None` collects users without one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCentralitySummary {
    pub groups: BTreeMap<Option<UserClass>, ClassStats>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}

pub fn per_class_summary(scores: &CentralityScores, classes: &BTreeMap<String, UserClass>) -> ClassCentralitySummary {
    let mut grouped: BTreeMap<Option<UserClass>, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (user, &d) in &scores.x_d {
        let e = scores.x_e.get(user).copied().unwrap_or(0.0);
        let g = grouped.entry(classes.get(user).copied()).or_default();
        g.0.push(d as f64);
        g.1.push(e);
    }
    let all_d: Vec<f64> = grouped.values().flat_map(|g| g.0.iter().copied()).collect();
    let all_e: Vec<f64> = grouped.values().flat_map(|g| g.1.iter().copied()).collect();
    let (sd, bd) = LogHistogram::layout(&all_d);
    let (se, be) = LogHistogram::layout(&all_e);
    let groups = grouped
        .into_iter()
        .map(|(class, (d, e))| {
            let stats = ClassStats {
                count: d.len(),
                median_x_d: median(&d).expect("group is nonempty"),
                median_x_e: median(&e).expect("group is nonempty"),
                hist_x_d: LogHistogram::fill(&d, sd, bd),
                hist_x_e: LogHistogram::fill(&e, se, be),
            };
            (class, stats)
        })
        .collect();
    ClassCentralitySummary { groups }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    EdgeCsv,
    GraphJson,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    user_a: String,
    user_b: String,
    weight: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonNode {
    id: String,
    x_d: u64,
    x_e: f64,
    class: Option<UserClass>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEdge {
    source: String,
    target: String,
    weight: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonGraph {
    nodes: Vec<JsonNode>,
    edges: Vec<JsonEdge>,
}

/// `user_a,user_b,weight` with `user_a < user_b`; isolated nodes are not representable.
pub fn write_edge_csv<W: Write>(graph: &InteractionGraph, out: W) -> Result<(), NetworkError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["user_a", "user_b", "weight"])?;
    for (a, b, weight) in graph.edges() {
        w.serialize(EdgeRow { user_a: a.into(), user_b: b.into(), weight })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_csv<R: Read>(input: R) -> Result<InteractionGraph, NetworkError> {
    let mut g = InteractionGraph::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: EdgeRow = row?;
        g.add_interaction(&row.user_a, &row.user_b, row.weight)?;
    }
    Ok(g)
}

/// Nodes carry `x_d`, `x_e` and `class`; scores missing from `scores` are 0.
pub fn write_graph_json<W: Write>(
    graph: &InteractionGraph,
    scores: &CentralityScores,
    classes: &BTreeMap<String, UserClass>,
    mut out: W,
) -> Result<(), NetworkError> {
    let doc = JsonGraph {
        nodes: graph
            .nodes
            .iter()
            .map(|n| JsonNode {
                id: n.clone(),
                x_d: scores.x_d.get(n).copied().unwrap_or(0),
                x_e: scores.x_e.get(n).copied().unwrap_or(0.0),
                class: classes.get(n).copied(),
            })
            .collect(),
        edges: graph.edges().map(|(a, b, weight)| JsonEdge { source: a.into(), target: b.into(), weight }).collect(),
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_graph_json<R: Read>(input: R) -> Result<InteractionGraph, NetworkError> {
    let doc: JsonGraph = serde_json::from_reader(input)?;
    let mut g = InteractionGraph::new();
    for n in &doc.nodes {
        g.add_node(&n.id);
    }
    for e in &doc.edges {
        g.add_interaction(&e.source, &e.target, e.weight)?;
    }
    Ok(g)
}

pub fn export_graph<W: Write>(
    graph: &InteractionGraph,
    scores: &CentralityScores,
    classes: &BTreeMap<String, UserClass>,
    format: ExportFormat,
    out: W,
) -> Result<(), NetworkError> {
    match format {
        ExportFormat::EdgeCsv => write_edge_csv(graph, out),
        ExportFormat::GraphJson => write_graph_json(graph, scores, classes, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{IdentificationRecord, ObservationRecord};
    use chrono::{Duration, TimeZone, Utc};
    use proptest::prelude::*;

    fn graph(edges: &[(&str, &str, u64)]) -> InteractionGraph {
        let mut g = InteractionGraph::new();
        for &(a, b, w) in edges {
            g.add_interaction(a, b, w).unwrap();
        }
        g
    }

    fn t(h: i64) -> chrono::DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 4, 24, 0, 0, 0).unwrap() + Duration::hours(h)
    }

    #[test]
    fn build_counts_interactions_both_ways() {
        let w = ChallengeWindow::new("c", 2020, t(0), t(48)).unwrap();
        let d = Dataset::from_records(
            vec![
                ObservationRecord::new("o1", "a", t(1)),
                ObservationRecord::new("o2", "b", t(2)),
                ObservationRecord::new("o3", "c", t(3)),
                ObservationRecord::new("late", "a", t(50)),
                ObservationRecord::new("o4", "lonely", t(4)),
            ],
            vec![
                IdentificationRecord::new("i1", "o1", "b", t(5), "x"),
                IdentificationRecord::new("i2", "o2", "a", t(6), "x"),
                IdentificationRecord::new("i3", "o3", "a", t(7), "x"),
                IdentificationRecord::new("i4", "o3", "a", t(8), "x"),
                IdentificationRecord::new("i5", "o3", "c", t(9), "x"),
                IdentificationRecord::new("i6", "late", "c", t(51), "x"),
            ],
            vec![w.clone()],
        )
        .unwrap();
        let g = build_graph(&d, &w, false);
        assert_eq!(g.weight("a", "b"), Some(2));
        assert_eq!(g.weight("c", "a"), Some(2));
        assert_eq!(g.edge_count(), 2);
        assert!(!g.nodes().contains("lonely"));
        assert!(build_graph(&d, &w, true).nodes().contains("lonely"));
    }

    #[test]
    fn degree_examples() {
        let g = graph(&[("v", "a", 2), ("v", "b", 3)]);
        assert_eq!(degree_centrality(&g)["v"], 5);
        assert_eq!(unweighted_degree(&g)["v"], 2);
        let tri = graph(&[("a", "b", 1), ("b", "c", 1), ("a", "c", 1)]);
        assert!(degree_centrality(&tri).values().all(|&d| d == 2));
    }

    #[test]
    fn self_loops_and_zero_weights_rejected() {
        let mut g = InteractionGraph::new();
        assert!(g.add_interaction("a", "a", 1).is_err());
        assert!(g.add_interaction("a", "b", 0).is_err());
    }

    #[test]
    fn components() {
        let g = graph(&[("a", "b", 1), ("c", "d", 1)]);
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.len() == 2));
        assert!(comps[0].contains("a"));
        assert_eq!(connected_components(&graph(&[("a", "b", 1), ("b", "c", 1), ("a", "c", 1)])).len(), 1);
    }

    #[test]
    fn eigenvector_closed_forms() {
        let tri =
            eigenvector_centrality(&graph(&[("a", "b", 1), ("b", "c", 1), ("a", "c", 1)]), PowerOptions::default())
                .unwrap();
        for v in tri.values() {
            assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-10);
        }
        let star =
            eigenvector_centrality(&graph(&[("h", "a", 1), ("h", "b", 1), ("h", "c", 1)]), PowerOptions::default())
                .unwrap();
        assert!((star["h"] - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((star["a"] - (1.0f64 / 6.0).sqrt()).abs() < 1e-10);
        let path = eigenvector_centrality(&graph(&[("a", "b", 1), ("b", "c", 1)]), PowerOptions::default()).unwrap();
        assert!((path["b"] / path["a"] - 2f64.sqrt()).abs() < 1e-10);
        assert!((path["a"] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn eigenvector_zero_outside_largest_component() {
        let g = graph(&[("a", "b", 1), ("b", "c", 1), ("x", "y", 5)]);
        let e = eigenvector_centrality(&g, PowerOptions::default()).unwrap();
        assert_eq!(e["x"], 0.0);
        assert!(e["b"] > 0.0);
        assert!(matches!(
            eigenvector_centrality(&InteractionGraph::new(), PowerOptions::default()),
            Err(NetworkError::EmptyGraph)
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = graph(&[("a", "b", 1), ("b", "c", 2), ("c", "d", 1)]);
        match eigenvector_centrality(&g, PowerOptions { tol: 1e-10, max_iter: 2 }) {
            Err(NetworkError::NotConverged { iterations: 2, residual }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn medians_and_unknown_bucket() {
        let scores = CentralityScores {
            x_d: BTreeMap::from([("a".into(), 1), ("b".into(), 3), ("c".into(), 7)]),
            x_e: BTreeMap::from([("a".into(), 0.1), ("b".into(), 0.3), ("c".into(), 0.0)]),
        };
        let classes = BTreeMap::from([("a".to_string(), UserClass::Observer), ("b".to_string(), UserClass::Observer)]);
        let s = per_class_summary(&scores, &classes);
        let obs = &s.groups[&Some(UserClass::Observer)];
        assert_eq!((obs.count, obs.median_x_d), (2, 2.0));
        assert!((obs.median_x_e - 0.2).abs() < 1e-15);
        let unknown = &s.groups[&None];
        assert_eq!((unknown.count, unknown.median_x_d), (1, 7.0));
        assert_eq!(unknown.hist_x_e.zeros, 1);
        assert_eq!(s.groups.values().map(|g| g.count).sum::<usize>(), 3);
        assert_eq!(obs.hist_x_d.counts.iter().sum::<u64>(), 2);
    }

    #[test]
    fn empty_graph_exports_header_only() {
        let mut buf = Vec::new();
        write_edge_csv(&InteractionGraph::new(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "user_a,user_b,weight\n");
    }

    fn arb_graph() -> impl Strategy<Value = InteractionGraph> {
        prop::collection::vec((0u8..15, 0u8..15, 1u64..20), 0..60).prop_map(|v| {
            let mut g = InteractionGraph::new();
            for (a, b, w) in v {
                if a != b {
                    g.add_interaction(&format!("n{a:02}"), &format!("n{b:02}"), w).unwrap();
                }
            }
            g
        })
    }

    proptest! {
        #[test]
        fn handshake(g in arb_graph()) {
            prop_assert_eq!(degree_centrality(&g).values().sum::<u64>(), 2 * g.total_weight());
        }

        #[test]
        fn exports_round_trip(g in arb_graph()) {
            let mut csv_buf = Vec::new();
            write_edge_csv(&g, &mut csv_buf).unwrap();
            prop_assert_eq!(&read_edge_csv(csv_buf.as_slice()).unwrap(), &g);
            let scores = CentralityScores { x_d: degree_centrality(&g), x_e: BTreeMap::new() };
            let mut json_buf = Vec::new();
            write_graph_json(&g, &scores, &BTreeMap::new(), &mut json_buf).unwrap();
            prop_assert_eq!(&read_graph_json(json_buf.as_slice()).unwrap(), &g);
        }

        #[test]
        fn eigenvector_scale_invariant(g in arb_graph(), s in 1u64..50) {
            prop_assume!(g.edge_count() > 0);
            let mut scaled = InteractionGraph::new();
            for (a, b, w) in g.edges() {
                scaled.add_interaction(a, b, w * s).unwrap();
            }
            let x = eigenvector_centrality(&g, PowerOptions::default()).unwrap();
            let y = eigenvector_centrality(&scaled, PowerOptions::default()).unwrap();
            for (k, v) in &x {
                prop_assert!((v - y[k]).abs() < 1e-9, "{} {} {}", k, v, y[k]);
            }
        }

        #[test]
        fn build_is_order_invariant(pairs in prop::collection::vec((0u8..6, 0u8..6), 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let w = ChallengeWindow::new("c", 2020, t(0), t(48)).unwrap();
            let obs: Vec<ObservationRecord> = (0..6).map(|u| ObservationRecord::new(format!("o{u}"), format!("u{u}"), t(1))).collect();
            let mut ids: Vec<IdentificationRecord> = pairs
                .iter()
                .enumerate()
                .map(|(k, &(o, u))| IdentificationRecord::new(format!("i{k}"), format!("o{o}"), format!("u{u}"), t(2), "x"))
                .collect();
            let a = build_graph(&Dataset::from_records(obs.clone(), ids.clone(), vec![w.clone()]).unwrap(), &w, false);
            ids.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = build_graph(&Dataset::from_records(obs, ids, vec![w.clone()]).unwrap(), &w, false);
            prop_assert_eq!(a, b);
        }
    }
}
