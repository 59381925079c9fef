use std::collections::{BTreeMap, BTreeSet};

use cnc_core::network::{connected_components, eigenvector_centrality, InteractionGraph, PowerOptions};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn name(i: usize) -> String {
    format!("n{i:03}")
}

/// Random spanning tree plus extra edges, so the graph is connected.
fn random_connected(rng: &mut ChaCha8Rng) -> (usize, InteractionGraph) {
    let n = rng.gen_range(2..=50);
    let mut g = InteractionGraph::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        g.add_interaction(&name(u), &name(v), rng.gen_range(1..10)).unwrap();
    }
    for _ in 0..rng.gen_range(0..2 * n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            g.add_interaction(&name(a), &name(b), rng.gen_range(1..10)).unwrap();
        }
    }
    (n, g)
}

fn dense_oracle(n: usize, g: &InteractionGraph) -> Vec<f64> {
    let idx: BTreeMap<String, usize> = (0..n).map(|i| (name(i), i)).collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (a, b, w) in g.edges() {
        m[(idx[a], idx[b])] = w as f64;
        m[(idx[b], idx[a])] = w as f64;
    }
    let eig = SymmetricEigen::new(m);
    let top = (0..n).max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap();
    let v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    v.into_iter().map(|x| x * sign).collect()
}

#[test]
fn power_iteration_matches_dense_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let (n, g) = random_connected(&mut rng);
        let got = eigenvector_centrality(&g, PowerOptions::default()).unwrap();
        let want = dense_oracle(n, &g);
        for i in 0..n {
            let diff = (got[&name(i)] - want[i]).abs();
            assert!(diff < 1e-8, "case {case} node {i}: {diff:e}");
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
}

#[test]
fn components_match_union_find() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let n = rng.gen_range(2..40);
        let mut g = InteractionGraph::new();
        let mut uf = UnionFind((0..n).collect());
        for i in 0..n {
            g.add_node(&name(i));
        }
        for _ in 0..rng.gen_range(0..n) {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                g.add_interaction(&name(a), &name(b), 1).unwrap();
                let (ra, rb) = (uf.find(a), uf.find(b));
                uf.0[ra] = rb;
            }
        }
        let mut oracle: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for i in 0..n {
            let r = uf.find(i);
            oracle.entry(r).or_default().insert(name(i));
        }
        let want: BTreeSet<BTreeSet<String>> = oracle.into_values().collect();
        let got: BTreeSet<BTreeSet<String>> = connected_components(&g).into_iter().collect();
        assert_eq!(got, want);
    }
}
