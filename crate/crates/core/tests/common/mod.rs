#![allow(dead_code)]

pub mod references;

use std::sync::Arc;

use pairwise_rcd::data::{Dataset, Example};
use pairwise_rcd::rng::{stream, Purpose};
use pairwise_rcd::{PairwiseLoss, RiskModel};
use rand::Rng;

/// Independent all-ordered-pairs evaluation straight from the per-pair loss.
pub fn brute_risk(loss: PairwiseLoss, data: &Dataset, lambda: f64, w: &[f64]) -> f64 {
    let ex = data.examples();
    let n = ex.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += loss.value(w, &ex[i], &ex[j]).unwrap();
            }
        }
    }
    total / (n * (n - 1)) as f64 + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

pub fn brute_gradient(loss: PairwiseLoss, data: &Dataset, lambda: f64, w: &[f64]) -> Vec<f64> {
    let ex = data.examples();
    let n = ex.len();
    let mut grad = vec![0.0; w.len()];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                for (g, v) in grad
                    .iter_mut()
                    .zip(loss.gradient(w, &ex[i], &ex[j]).unwrap())
                {
                    *g += v;
                }
            }
        }
    }
    let norm = (n * (n - 1)) as f64;
    grad.iter()
        .zip(w)
        .map(|(g, wk)| g / norm + lambda * wk)
        .collect()
}

/// Central finite-difference gradient.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    let mut x = w.to_vec();
    (0..w.len())
        .map(|k| {
            let orig = x[k];
            x[k] = orig + h;
            let up = f(&x);
            x[k] = orig - h;
            let down = f(&x);
            x[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Random instance: sparse-ish Gaussian features, labels from the loss family
/// (`+-1` for AUC/metric, small integers for ranking).
pub fn random_instance(seed: u64, n: usize, dim: usize, ranking: bool) -> Dataset {
    let mut rng = stream(seed, Purpose::Checks, 99);
    let examples = (0..n)
        .map(|_| {
            let mut features: Vec<(u32, f64)> = Vec::new();
            for k in 0..dim {
                if rng.random_bool(0.7) {
                    features.push((k as u32, rng.random_range(-1.5..1.5)));
                }
            }
            let label = if ranking {
                rng.random_range(0..4) as f64
            } else if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            };
            Example::new(features, label).unwrap()
        })
        .collect();
    Dataset::new("random", dim, examples).unwrap()
}

pub fn random_point(seed: u64, dim: usize, scale: f64) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Checks, 98);
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn model(key: &str, data: Dataset, lambda: f64) -> RiskModel {
    RiskModel::new(
        PairwiseLoss::from_key(key).unwrap(),
        Arc::new(data),
        lambda,
        pairwise_rcd::PairPolicy::AllPairs,
    )
    .unwrap()
}
