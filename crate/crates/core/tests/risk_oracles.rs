mod common;

use std::sync::Arc;

use common::*;
use pairwise_rcd::data::{Dataset, Example};
use pairwise_rcd::optim::unbiasedness_check;
use pairwise_rcd::{PairPolicy, PairwiseLoss, RiskModel};
use proptest::prelude::*;

const LINEAR_KEYS: [&str; 4] = ["auc-logistic", "auc-hinge", "rank-logistic", "rank-hinge"];

#[test]
fn risk_and_gradient_match_brute_force() {
    for seed in 0..40u64 {
        for key in LINEAR_KEYS
            .iter()
            .chain(&["metric-logistic", "metric-hinge"])
        {
            let metric = key.starts_with("metric");
            let (n, dim) = if metric {
                (12, 3)
            } else {
                (5 + seed as usize % 30, 1 + seed as usize % 12)
            };
            let data = random_instance(seed, n, dim, key.starts_with("rank"));
            let loss = PairwiseLoss::from_key(key).unwrap();
            let lambda = if seed % 2 == 0 { 0.0 } else { 0.3 };
            let m = model(key, data.clone(), lambda);
            let w = random_point(seed, m.param_dim(), 1.0);
            let fast = m.empirical_risk(&w).unwrap();
            let slow = brute_risk(loss, &data, lambda, &w);
            assert!(
                rel_err(fast, slow, 1e-300) <= 1e-10,
                "{key} seed {seed}: {fast} vs {slow}"
            );
            let g = m.full_gradient(&w).unwrap();
            let gb = brute_gradient(loss, &data, lambda, &w);
            let scale = gb.iter().map(|v| v.abs()).fold(1e-12, f64::max);
            for (a, b) in g.iter().zip(&gb) {
                assert!(
                    (a - b).abs() <= 1e-10 * scale,
                    "{key} seed {seed}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn coordinate_gradients_match_full_gradient() {
    for seed in 0..30u64 {
        for key in LINEAR_KEYS.iter().chain(&["metric-logistic"]) {
            let metric = key.starts_with("metric");
            let data = random_instance(
                seed,
                if metric { 10 } else { 25 },
                if metric { 3 } else { 8 },
                key.starts_with("rank"),
            );
            let m = model(key, data, 0.1);
            let w = random_point(seed + 100, m.param_dim(), 1.0);
            let full = m.full_gradient(&w).unwrap();
            let cache = m.new_cache(&w).unwrap();
            for (k, g) in full.iter().enumerate() {
                let c = m.coordinate_gradient(&w, k, &cache).unwrap();
                assert!(
                    (c - g).abs() <= 1e-10 * g.abs().max(1.0),
                    "{key} k={k}: {c} vs {g}"
                );
            }
        }
    }
}

#[test]
fn sampled_policy_coordinates_match_full_gradient() {
    let data = random_instance(4, 30, 6, false);
    let m = RiskModel::new(
        PairwiseLoss::from_key("auc-logistic").unwrap(),
        Arc::new(data),
        0.0,
        PairPolicy::Sampled {
            pairs: 400,
            seed: 2,
        },
    )
    .unwrap();
    let w = random_point(3, 6, 1.0);
    let full = m.full_gradient(&w).unwrap();
    let fd = finite_difference(|x| m.empirical_risk(x).unwrap(), &w, 1e-6);
    let cache = m.new_cache(&w).unwrap();
    for k in 0..6 {
        assert!((m.coordinate_gradient(&w, k, &cache).unwrap() - full[k]).abs() < 1e-12);
        assert!(rel_err(fd[k], full[k], 1e-3) < 1e-5);
    }
}

#[test]
fn duplicated_dataset_matches_brute_force() {
    let base = random_instance(8, 10, 4, false);
    let doubled: Vec<Example> = base
        .examples()
        .iter()
        .flat_map(|e| [e.clone(), e.clone()])
        .collect();
    let doubled = Dataset::new("doubled", 4, doubled).unwrap();
    let loss = PairwiseLoss::from_key("auc-logistic").unwrap();
    let m = model("auc-logistic", doubled.clone(), 0.0);
    let w = random_point(1, 4, 1.0);
    let g = m.full_gradient(&w).unwrap();
    for (a, b) in g.iter().zip(brute_gradient(loss, &doubled, 0.0, &w)) {
        assert!((a - b).abs() < 1e-12);
    }
    // each original ordered pair now appears 4 times among 20*19 ordered pairs, plus
    // identical-copy pairs that carry no gradient
    let g0 = model("auc-logistic", base, 0.0).full_gradient(&w).unwrap();
    for (a, b) in g.iter().zip(&g0) {
        assert!((a - b * 4.0 * 90.0 / 380.0).abs() < 1e-12);
    }
}

#[test]
fn cache_tracks_commits_and_refreshes() {
    let data = random_instance(5, 40, 10, false);
    let m = model("auc-logistic", data.clone(), 0.0);
    let mut w = random_point(5, 10, 1.0);
    let mut cache = m.new_cache(&w).unwrap();
    let deltas = random_point(6, 10, 0.5);
    for (k, &delta) in deltas.iter().enumerate() {
        m.commit_coordinate_step(&mut cache, k, delta);
        w[k] += delta;
    }
    let fresh = m.new_cache(&w).unwrap();
    for (a, b) in cache.scores().unwrap().iter().zip(fresh.scores().unwrap()) {
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
    }
    assert_eq!(cache.version(), 10);
    let mut one = m.new_cache(&w).unwrap();
    m.commit_coordinate_step(&mut one, 3, 0.7);
    let mut refreshed = one.clone();
    m.refresh(&mut refreshed);
    for (a, b) in one
        .scores()
        .unwrap()
        .iter()
        .zip(refreshed.scores().unwrap())
    {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn metric_cache_tracks_commits() {
    let data = random_instance(9, 12, 3, false);
    let m = model("metric-logistic", data, 0.0);
    let mut w = random_point(2, 9, 0.5);
    let mut cache = m.new_cache(&w).unwrap();
    for (k, wk) in w.iter_mut().enumerate() {
        m.commit_coordinate_step(&mut cache, k, 0.1 * k as f64 - 0.3);
        *wk += 0.1 * k as f64 - 0.3;
    }
    assert!((m.risk_from_cache(&cache) - m.empirical_risk(&w).unwrap()).abs() < 1e-12);
    for k in 0..9 {
        let c = m.coordinate_gradient(&w, k, &cache).unwrap();
        let f = m.full_gradient(&w).unwrap()[k];
        assert!((c - f).abs() < 1e-12);
    }
}

#[test]
fn unbiasedness_on_random_instances() {
    for seed in 0..100u64 {
        let data = random_instance(seed, 10 + seed as usize % 20, 20, false);
        let m = model("auc-logistic", data, 0.05 * (seed % 3) as f64);
        let w = random_point(seed, 20, 1.0);
        assert!(unbiasedness_check(&m, &w).unwrap() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cache_soundness_under_random_commits(
        seed in 0u64..1000,
        steps in prop::collection::vec((0usize..6, -2.0f64..2.0), 1..200),
    ) {
        let m = model("rank-logistic", random_instance(seed, 15, 6, true), 0.0);
        let mut w = vec![0.0; 6];
        let mut cache = m.new_cache(&w).unwrap();
        for &(k, delta) in &steps {
            m.commit_coordinate_step(&mut cache, k, delta);
            w[k] += delta;
        }
        for (ex, s) in m.data().examples().iter().zip(cache.scores().unwrap()) {
            let exact = ex.dot(&w);
            prop_assert!((s - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn convexity_of_logistic_risk(seed in 0u64..10_000, lambda in prop::sample::select(vec![0.0, 0.2])) {
        let m = model("auc-logistic", random_instance(seed, 12, 5, false), lambda);
        let w = random_point(seed, 5, 2.0);
        let w2 = random_point(seed + 1, 5, 2.0);
        let g2 = m.full_gradient(&w2).unwrap();
        let lin: f64 = w.iter().zip(&w2).zip(&g2).map(|((a, b), g)| (a - b) * g).sum();
        let dist: f64 = w.iter().zip(&w2).map(|(a, b)| (a - b) * (a - b)).sum();
        let gap = m.empirical_risk(&w).unwrap() - m.empirical_risk(&w2).unwrap();
        prop_assert!(gap >= lin + 0.5 * lambda * dist - 1e-12);
    }

    #[test]
    fn stale_cache_always_rejected(seed in 0u64..1000, k in 0usize..4, bump in 1e-6f64..1.0) {
        let m = model("auc-logistic", random_instance(seed, 6, 4, false), 0.0);
        let w = random_point(seed, 4, 1.0);
        let cache = m.new_cache(&w).unwrap();
        let mut moved = w.clone();
        moved[k] += bump;
        prop_assert_eq!(m.coordinate_gradient(&moved, k, &cache), Err(pairwise_rcd::Error::StaleCache));
    }
}
