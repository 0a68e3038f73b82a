//! Pairwise losses for AUC maximization, bipartite ranking and metric learning.
//!
//! All three families wrap a scalar link `phi`:
//!
//! * AUC: `f(w; z, z') = phi(w . (x - x')) * 1[y = +1, y' = -1]`
//! * ranking: `f(w; z, z') = phi(sgn(y - y') * w . (x - x'))`, with `sgn(0) = 0`
//! * metric: `f(W; z, z') = phi(tau(y, y') * (x - x')^T W (x - x'))`, `tau = +1` iff `y = y'`
//!
//! Metric parameters are a `d x d` matrix flattened row-major.

use std::fmt;

use rand::Rng;

use crate::data::{Dataset, Example};
use crate::error::{arg_err, Error, Result};
use crate::rng::{stream, Purpose};

/// Scalar link `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// `log(1 + exp(-t))`
    Logistic,
    /// `max(1 - t, 0)`
    Hinge,
}

impl Link {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Link::Logistic => {
                if t > 0.0 {
                    (-t).exp().ln_1p()
                } else {
                    -t + t.exp().ln_1p()
                }
            }
            Link::Hinge => (1.0 - t).max(0.0),
        }
    }

    /// `phi'(t)`. The hinge subgradient at the kink `t = 1` is 0.
    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Link::Logistic => -1.0 / (1.0 + t.exp()),
            Link::Hinge => {
                if t < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup |phi''|`, or `None` when `phi'` is discontinuous.
    pub fn curvature_bound(self) -> Option<f64> {
        match self {
            Link::Logistic => Some(0.25),
            Link::Hinge => None,
        }
    }

    pub fn is_smooth(self) -> bool {
        self.curvature_bound().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Auc,
    Ranking,
    Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairwiseLoss {
    pub family: Family,
    pub link: Link,
}

/// Data-derived regularity constants of a loss on one dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    /// `L`: gradient Lipschitz constant of `f(.; z, z')`, uniform over the pairs. `None` for hinge links.
    pub smoothness: Option<f64>,
    /// `G`: bound on `||grad f||` over the pairs (valid for every `w` since `|phi'| <= 1`).
    pub lipschitz: f64,
    /// Whether the maximum was taken over every pair (`false`: sampled, inflated by [`SAMPLED_SAFETY_FACTOR`]).
    pub exact: bool,
}

/// Exact pair maximization is used up to this many examples.
pub const EXACT_PAIR_LIMIT: usize = 2000;
/// Pairs drawn when the dataset is larger than [`EXACT_PAIR_LIMIT`].
pub const SAMPLED_PAIRS: usize = 1_000_000;
/// Inflation applied to sampled maxima.
pub const SAMPLED_SAFETY_FACTOR: f64 = 1.1;

impl fmt::Display for PairwiseLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl PairwiseLoss {
    pub const KEYS: [&'static str; 6] = [
        "auc-logistic",
        "auc-hinge",
        "rank-logistic",
        "rank-hinge",
        "metric-logistic",
        "metric-hinge",
    ];

    pub fn new(family: Family, link: Link) -> Self {
        PairwiseLoss { family, link }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        let (family, link) = match key {
            "auc-logistic" => (Family::Auc, Link::Logistic),
            "auc-hinge" => (Family::Auc, Link::Hinge),
            "rank-logistic" => (Family::Ranking, Link::Logistic),
            "rank-hinge" => (Family::Ranking, Link::Hinge),
            "metric-logistic" => (Family::Metric, Link::Logistic),
            "metric-hinge" => (Family::Metric, Link::Hinge),
            other => {
                return arg_err(format!(
                    "unknown loss `{other}` (expected one of {})",
                    Self::KEYS.join(", ")
                ))
            }
        };
        Ok(PairwiseLoss { family, link })
    }

    pub fn key(&self) -> &'static str {
        match (self.family, self.link) {
            (Family::Auc, Link::Logistic) => "auc-logistic",
            (Family::Auc, Link::Hinge) => "auc-hinge",
            (Family::Ranking, Link::Logistic) => "rank-logistic",
            (Family::Ranking, Link::Hinge) => "rank-hinge",
            (Family::Metric, Link::Logistic) => "metric-logistic",
            (Family::Metric, Link::Hinge) => "metric-hinge",
        }
    }

    pub fn param_dim(&self, input_dim: usize) -> usize {
        match self.family {
            Family::Auc | Family::Ranking => input_dim,
            Family::Metric => input_dim * input_dim,
        }
    }

    /// Multiplier applied to the pair score: the AUC indicator, `sgn(y - y')`, or `tau(y, y')`.
    pub fn pair_sign(&self, y: f64, y2: f64) -> f64 {
        match self.family {
            Family::Auc => {
                if y == 1.0 && y2 == -1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Ranking => {
                if y > y2 {
                    1.0
                } else if y < y2 {
                    -1.0
                } else {
                    0.0
                }
            }
            Family::Metric => {
                if y == y2 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Whether the pair can contribute a non-constant term.
    pub fn pair_is_active(&self, y: f64, y2: f64) -> bool {
        self.pair_sign(y, y2) != 0.0
    }

    fn input_dim_of(&self, w: &[f64], z: &Example, z2: &Example) -> Result<usize> {
        let need = z.min_dim().max(z2.min_dim());
        let m = match self.family {
            Family::Auc | Family::Ranking => w.len(),
            Family::Metric => {
                let m = (w.len() as f64).sqrt().round() as usize;
                if m * m != w.len() {
                    return arg_err(format!(
                        "metric parameter length {} is not a perfect square",
                        w.len()
                    ));
                }
                m
            }
        };
        if need > m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: need,
            });
        }
        Ok(m)
    }

    /// The raw pair score before the sign: `w . (x - x')` or `(x - x')^T W (x - x')`.
    fn pair_score(&self, w: &[f64], m: usize, diff: &[(u32, f64)]) -> f64 {
        match self.family {
            Family::Auc | Family::Ranking => diff.iter().map(|&(i, v)| v * w[i as usize]).sum(),
            Family::Metric => quadratic_form(w, m, diff),
        }
    }

    /// `f(w; z, z2)`.
    pub fn value(&self, w: &[f64], z: &Example, z2: &Example) -> Result<f64> {
        let m = self.input_dim_of(w, z, z2)?;
        let sign = self.pair_sign(z.label(), z2.label());
        if self.family == Family::Auc && sign == 0.0 {
            return Ok(0.0);
        }
        let diff = z.difference(z2);
        Ok(self.link.value(sign * self.pair_score(w, m, &diff)))
    }

    /// `grad_w f(w; z, z2)`.
    pub fn gradient(&self, w: &[f64], z: &Example, z2: &Example) -> Result<Vec<f64>> {
        let m = self.input_dim_of(w, z, z2)?;
        let mut out = vec![0.0; w.len()];
        let sign = self.pair_sign(z.label(), z2.label());
        if sign == 0.0 {
            return Ok(out);
        }
        let diff = z.difference(z2);
        let coef = self.link.derivative(sign * self.pair_score(w, m, &diff)) * sign;
        match self.family {
            Family::Auc | Family::Ranking => {
                for &(i, v) in &diff {
                    out[i as usize] = coef * v;
                }
            }
            Family::Metric => {
                for &(a, va) in &diff {
                    for &(b, vb) in &diff {
                        out[a as usize * m + b as usize] = coef * va * vb;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Pair "size" whose maximum drives `L` and `G`: `||x - x'||^2` (linear) or `||x - x'||^4` (metric).
    fn pair_extent(&self, sq_dist: f64) -> f64 {
        match self.family {
            Family::Auc | Family::Ranking => sq_dist,
            Family::Metric => sq_dist * sq_dist,
        }
    }

    /// `L = sup|phi''| * max ext` and `G = sqrt(max ext)` over the active pairs of `data`.
    ///
    /// Exact for `n <= EXACT_PAIR_LIMIT`; otherwise `SAMPLED_PAIRS` uniformly drawn ordered pairs
    /// with the result multiplied by `SAMPLED_SAFETY_FACTOR`.
    pub fn constants(&self, data: &Dataset, seed: u64) -> LossConstants {
        let ex = data.examples();
        let n = ex.len();
        let mut max_ext: f64 = 0.0;
        let exact = n <= EXACT_PAIR_LIMIT;
        if exact {
            for a in 0..n {
                for b in (a + 1)..n {
                    if self.pair_is_active(ex[a].label(), ex[b].label())
                        || self.pair_is_active(ex[b].label(), ex[a].label())
                    {
                        max_ext = max_ext.max(self.pair_extent(ex[a].squared_distance(&ex[b])));
                    }
                }
            }
        } else {
            let mut rng = stream(seed, Purpose::SmoothnessSampling, 0);
            for _ in 0..SAMPLED_PAIRS {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                if self.pair_is_active(ex[a].label(), ex[b].label()) {
                    max_ext = max_ext.max(self.pair_extent(ex[a].squared_distance(&ex[b])));
                }
            }
            max_ext *= SAMPLED_SAFETY_FACTOR;
        }
        LossConstants {
            smoothness: self.link.curvature_bound().map(|c| c * max_ext),
            lipschitz: max_ext.sqrt(),
            exact,
        }
    }
}

/// `v^T W v` for sparse `v` and row-major `W` of side `m`.
pub(crate) fn quadratic_form(w: &[f64], m: usize, v: &[(u32, f64)]) -> f64 {
    let mut q = 0.0;
    for &(a, va) in v {
        let row = &w[a as usize * m..(a as usize + 1) * m];
        let mut inner = 0.0;
        for &(b, vb) in v {
            inner += row[b as usize] * vb;
        }
        q += va * inner;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn ex(x: &[f64], y: f64) -> Example {
        Example::from_dense(x, y)
    }

    #[test]
    fn logistic_link_values() {
        assert_relative_eq!(Link::Logistic.value(0.0), LN_2);
        assert_relative_eq!(Link::Logistic.derivative(0.0), -0.5);
        assert!(Link::Logistic.value(800.0) >= 0.0);
        assert_relative_eq!(Link::Logistic.value(-800.0), 800.0);
        assert_eq!(Link::Logistic.derivative(-800.0), -1.0);
        assert_eq!(Link::Logistic.derivative(800.0), 0.0);
    }

    #[test]
    fn hinge_link_values() {
        assert_eq!(Link::Hinge.value(0.0), 1.0);
        assert_eq!(Link::Hinge.value(2.0), 0.0);
        assert_eq!(Link::Hinge.derivative(0.5), -1.0);
        assert_eq!(Link::Hinge.derivative(1.0), 0.0);
        assert_eq!(Link::Hinge.derivative(1.5), 0.0);
        assert!(!Link::Hinge.is_smooth());
    }

    #[test]
    fn auc_value_at_zero() {
        let loss = PairwiseLoss::from_key("auc-logistic").unwrap();
        let z = ex(&[1.0, 0.0], 1.0);
        let z2 = ex(&[0.0, 1.0], -1.0);
        assert_relative_eq!(loss.value(&[0.0, 0.0], &z, &z2).unwrap(), LN_2);
        assert_eq!(
            loss.value(&[0.0, 0.0], &z, &ex(&[0.0, 1.0], 1.0)).unwrap(),
            0.0
        );
        assert_eq!(loss.value(&[0.0, 0.0], &z2, &z).unwrap(), 0.0);
    }

    #[test]
    fn auc_gradient_at_zero() {
        let loss = PairwiseLoss::from_key("auc-logistic").unwrap();
        let g = loss
            .gradient(&[0.0, 0.0], &ex(&[1.0, 0.0], 1.0), &ex(&[0.0, 1.0], -1.0))
            .unwrap();
        assert_eq!(g, vec![-0.5, 0.5]);
        let g = loss
            .gradient(&[0.3, 0.1], &ex(&[1.0, 0.0], 1.0), &ex(&[0.0, 1.0], 1.0))
            .unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn metric_gradient_at_zero() {
        let loss = PairwiseLoss::from_key("metric-logistic").unwrap();
        let g = loss
            .gradient(&[0.0; 4], &ex(&[1.0, 1.0], 1.0), &ex(&[0.0, 0.0], 1.0))
            .unwrap();
        assert_eq!(g, vec![-0.5; 4]);
        assert_eq!(loss.param_dim(3), 9);
    }

    #[test]
    fn ranking_equal_labels_is_constant() {
        let loss = PairwiseLoss::from_key("rank-logistic").unwrap();
        let (z, z2) = (ex(&[1.0, 2.0], 0.5), ex(&[3.0, -1.0], 0.5));
        assert_relative_eq!(loss.value(&[4.0, -2.0], &z, &z2).unwrap(), LN_2);
        assert_eq!(
            loss.gradient(&[4.0, -2.0], &z, &z2).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn dimension_mismatch() {
        let loss = PairwiseLoss::from_key("auc-logistic").unwrap();
        let z = ex(&[1.0, 0.0, 2.0], 1.0);
        assert!(matches!(
            loss.value(&[0.0, 0.0], &z, &z),
            Err(Error::DimensionMismatch { .. })
        ));
        let metric = PairwiseLoss::from_key("metric-logistic").unwrap();
        assert!(metric.gradient(&[0.0; 5], &z, &z).is_err());
    }

    #[test]
    fn keys_round_trip() {
        for key in PairwiseLoss::KEYS {
            assert_eq!(PairwiseLoss::from_key(key).unwrap().key(), key);
        }
        assert!(PairwiseLoss::from_key("auc-squared").is_err());
    }

    #[test]
    fn constants_from_data() {
        let ds = Dataset::from_examples(
            "c",
            vec![
                ex(&[1.0, 0.0], 1.0),
                ex(&[0.0, 1.0], -1.0),
                ex(&[3.0, 0.0], 1.0),
            ],
        );
        let auc = PairwiseLoss::from_key("auc-logistic")
            .unwrap()
            .constants(&ds, 0);
        // active pairs: (0,1) dist^2 = 2, (2,1) dist^2 = 10
        assert_eq!(auc.smoothness, Some(2.5));
        assert_relative_eq!(auc.lipschitz, 10f64.sqrt());
        assert!(auc.exact);
        let hinge = PairwiseLoss::from_key("auc-hinge")
            .unwrap()
            .constants(&ds, 0);
        assert_eq!(hinge.smoothness, None);
    }
}
