use cnc_core::classify::{elbow, kmeans, kmeans_best_of, label_clusters, ActivityPoint, KMeansOptions, UserClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const CENTRES: [(f64, f64, UserClass); 4] = [
    (0.0, 0.0, UserClass::LowActivity),
    (69.0, 19.0, UserClass::Observer),
    (27.0, 92.0, UserClass::Identifier),
    (120.0, 70.0, UserClass::HighActivity),
];

fn blobs(seed: u64) -> (Vec<ActivityPoint>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (b, &(cx, cy, _)) in CENTRES.iter().enumerate() {
        for i in 0..200 {
            points.push(ActivityPoint::new(
                format!("b{b}-{i}"),
                cx + noise.sample(&mut rng),
                cy + noise.sample(&mut rng),
            ));
            truth.push(b);
        }
    }
    (points, truth)
}

#[test]
fn planted_blobs_are_recovered_and_labeled() {
    let opts = KMeansOptions::default();
    let mut elbow_hits = 0;
    for seed in 0..20 {
        let (points, truth) = blobs(1000 + seed);
        let model = kmeans_best_of(&points, 4, seed, 10, opts).unwrap();
        let labels = label_clusters(&model).unwrap();
        for (i, &b) in truth.iter().enumerate() {
            assert_eq!(labels.classes[model.assignment[i]], CENTRES[b].2, "seed {seed} point {i}");
        }
        let e = elbow(&points, 1, 8, seed, 10, opts).unwrap();
        if e.chosen_k == 4 {
            elbow_hits += 1;
        }
    }
    assert!(elbow_hits >= 19, "elbow picked 4 in {elbow_hits}/20 seeds");
}

fn brute_force_two_partition(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    // fix point 0 in the first part; every other subset of the rest goes with it
    for mask in 0u32..(1 << (n - 1)) {
        let full = (mask << 1) | 1;
        if full.count_ones() as usize == n {
            continue;
        }
        let mut cost = 0.0;
        for side in [true, false] {
            let members: Vec<(f64, f64)> =
                (0..n).filter(|&i| ((full >> i) & 1 == 1) == side).map(|i| points[i]).collect();
            let m = members.len() as f64;
            let (mx, my) = members.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / m, a.1 + p.1 / m));
            cost += members.iter().map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2)).sum::<f64>();
        }
        best = best.min(cost);
    }
    best
}

#[test]
fn best_of_restarts_matches_exhaustive_two_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..50 {
        let n = rng.gen_range(2..=10);
        let raw: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))).collect();
        let points: Vec<ActivityPoint> =
            raw.iter().enumerate().map(|(i, &(x, y))| ActivityPoint::new(i.to_string(), x, y)).collect();
        let got = kmeans_best_of(&points, 2, case, 20, KMeansOptions::default()).unwrap().inertia;
        let want = brute_force_two_partition(&raw);
        assert!((got - want).abs() <= 1e-9, "case {case}: {got} vs {want}");
    }
}

#[test]
fn same_seed_same_model() {
    let (points, _) = blobs(5);
    let a = kmeans(&points, 4, 9, KMeansOptions::default()).unwrap();
    let b = kmeans(&points, 4, 9, KMeansOptions::default()).unwrap();
    assert_eq!(a, b);
}
