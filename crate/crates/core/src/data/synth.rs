//! Synthetic datasets with a known generating distribution.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Example};
use crate::error::{arg_err, Result};
use crate::rng::{stream, Purpose, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub enum LabelRule {
    /// `y = sign(truth . x)`, with `sign(0) = +1`.
    SignOfLinear(Vec<f64>),
    /// Half the labels `+1` (rounded up), half `-1`, in random order.
    BalancedRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureModel {
    /// i.i.d. standard normal entries, every coordinate stored.
    Gaussian,
    /// `active` distinct coordinates set to 1, the rest absent (one-hot style data).
    SparseBinary { active: usize },
}

/// A sampling distribution over labeled examples.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    dim: usize,
    features: FeatureModel,
    rule: LabelRule,
}

/// Standard normal ground-truth direction for [`LabelRule::SignOfLinear`].
pub fn ground_truth(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Synthetic, u64::from(u32::MAX));
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

impl SyntheticSource {
    pub fn new(dim: usize, features: FeatureModel, rule: LabelRule) -> Result<Self> {
        if dim < 1 {
            return arg_err("synthetic dim must be at least 1");
        }
        if let LabelRule::SignOfLinear(truth) = &rule {
            if truth.len() != dim {
                return arg_err(format!(
                    "ground truth has length {} but dim is {dim}",
                    truth.len()
                ));
            }
        }
        if let FeatureModel::SparseBinary { active } = features {
            if active == 0 || active > dim {
                return arg_err(format!("active count {active} must lie in 1..={dim}"));
            }
        }
        Ok(SyntheticSource {
            dim,
            features,
            rule,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> &LabelRule {
        &self.rule
    }

    fn sample_features(&self, rng: &mut StreamRng) -> Vec<(u32, f64)> {
        match self.features {
            FeatureModel::Gaussian => (0..self.dim)
                .map(|i| (i as u32, rng.sample(StandardNormal)))
                .collect(),
            FeatureModel::SparseBinary { active } => {
                let mut idx = rand::seq::index::sample(rng, self.dim, active).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| (i as u32, 1.0)).collect()
            }
        }
    }

    fn linear_label(truth: &[f64], features: &[(u32, f64)]) -> f64 {
        let score: f64 = features.iter().map(|&(i, v)| truth[i as usize] * v).sum();
        if score >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// One fresh example. Under the balanced rule the label is a fair coin.
    pub fn sample_example(&self, rng: &mut StreamRng) -> Example {
        let features = self.sample_features(rng);
        let label = match &self.rule {
            LabelRule::SignOfLinear(truth) => Self::linear_label(truth, &features),
            LabelRule::BalancedRandom => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        Example { features, label }
    }

    /// `n` examples; deterministic in `seed`.
    pub fn dataset(&self, n: usize, seed: u64, name: impl Into<String>) -> Result<Dataset> {
        let mut rng = stream(seed, Purpose::Synthetic, 0);
        let mut examples: Vec<Example> = (0..n)
            .map(|_| {
                let features = self.sample_features(&mut rng);
                let label = match &self.rule {
                    LabelRule::SignOfLinear(truth) => Self::linear_label(truth, &features),
                    LabelRule::BalancedRandom => 0.0,
                };
                Example { features, label }
            })
            .collect();
        if self.rule == LabelRule::BalancedRandom {
            let mut labels: Vec<f64> = (0..n)
                .map(|i| if i < n.div_ceil(2) { 1.0 } else { -1.0 })
                .collect();
            labels.shuffle(&mut rng);
            for (ex, y) in examples.iter_mut().zip(labels) {
                ex.label = y;
            }
        }
        Dataset::new(name, self.dim, examples)
    }
}

/// Dense standard-normal features with labels from `label_rule`.
pub fn synth_gaussian(n: usize, d: usize, label_rule: LabelRule, seed: u64) -> Result<Dataset> {
    if n < 2 || d < 1 {
        return arg_err(format!(
            "synthetic data needs n >= 2 and d >= 1 (got n={n}, d={d})"
        ));
    }
    SyntheticSource::new(d, FeatureModel::Gaussian, label_rule)?.dataset(
        n,
        seed,
        format!("gauss-n{n}-d{d}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_labels() {
        let ds = synth_gaussian(4, 2, LabelRule::BalancedRandom, 3).unwrap();
        assert_eq!(ds.labels().filter(|&y| y == 1.0).count(), 2);
        assert_eq!(ds.labels().filter(|&y| y == -1.0).count(), 2);
    }

    #[test]
    fn deterministic() {
        let a = synth_gaussian(10, 3, LabelRule::BalancedRandom, 11).unwrap();
        let b = synth_gaussian(10, 3, LabelRule::BalancedRandom, 11).unwrap();
        let c = synth_gaussian(10, 3, LabelRule::BalancedRandom, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sign_of_linear_agrees_with_truth() {
        let truth = ground_truth(20, 5);
        let ds = synth_gaussian(200, 20, LabelRule::SignOfLinear(truth.clone()), 5).unwrap();
        let agree = ds
            .examples()
            .iter()
            .filter(|e| (e.dot(&truth) >= 0.0) == (e.label() > 0.0))
            .count();
        assert_eq!(agree, 200);
        assert_eq!(ds.example(0).features().len(), 20);
    }

    #[test]
    fn argument_errors() {
        assert!(synth_gaussian(1, 2, LabelRule::BalancedRandom, 0).is_err());
        assert!(synth_gaussian(5, 0, LabelRule::BalancedRandom, 0).is_err());
        assert!(SyntheticSource::new(
            3,
            FeatureModel::Gaussian,
            LabelRule::SignOfLinear(vec![1.0])
        )
        .is_err());
        assert!(SyntheticSource::new(
            3,
            FeatureModel::SparseBinary { active: 4 },
            LabelRule::BalancedRandom
        )
        .is_err());
    }

    #[test]
    fn sparse_binary_has_fixed_support() {
        let src = SyntheticSource::new(
            122,
            FeatureModel::SparseBinary { active: 14 },
            LabelRule::BalancedRandom,
        )
        .unwrap();
        let ds = src.dataset(50, 1, "a3a-like").unwrap();
        assert!(ds.examples().iter().all(|e| e.features().len() == 14));
        assert!(ds
            .examples()
            .iter()
            .all(|e| e.features().iter().all(|&(_, v)| v == 1.0)));
    }
}
