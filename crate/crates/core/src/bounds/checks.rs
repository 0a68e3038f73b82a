//! Randomized checks of the coercivity and self-bounding inequalities.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Example;
use crate::loss::PairwiseLoss;
use crate::risk::RiskModel;
use crate::rng::{stream, Purpose};

/// Slack allowed for floating-point round-off, relative to the larger side.
const RELATIVE_SLACK: f64 = 1e-9;

/// A function with a gradient.
pub trait DifferentiableFn {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
}

impl DifferentiableFn for RiskModel {
    fn dim(&self) -> usize {
        self.param_dim()
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.empirical_risk(w)
            .expect("checker draws points of the model's dimension")
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.full_gradient(w)
            .expect("checker draws points of the model's dimension")
    }
}

/// `w -> f(w; z, z')` for one fixed pair of examples.
#[derive(Debug, Clone)]
pub struct PairObjective<'a> {
    pub loss: PairwiseLoss,
    pub z: &'a Example,
    pub z2: &'a Example,
    pub dim: usize,
}

impl DifferentiableFn for PairObjective<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.loss
            .value(w, self.z, self.z2)
            .expect("dimension fixed at construction")
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.loss
            .gradient(w, self.z, self.z2)
            .expect("dimension fixed at construction")
    }
}

/// Outcome of a randomized inequality check. `margin = lhs - rhs` for an
/// inequality of the form `lhs >= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub trials: usize,
    pub violations: usize,
    pub worst_margin: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn draw(rng: &mut crate::rng::StreamRng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tally(margins: impl Iterator<Item = (f64, f64)>) -> CheckReport {
    let mut report = CheckReport {
        trials: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
    };
    for (lhs, rhs) in margins {
        let margin = lhs - rhs;
        report.trials += 1;
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -RELATIVE_SLACK * lhs.abs().max(rhs.abs()) {
            report.violations += 1;
        }
    }
    report
}

/// Checks `<w - w', g'(w) - g'(w')> >= (beta/L) ||g'(w) - g'(w')||^2 + (1 - beta) sigma ||w - w'||^2`
/// at `trials` random pairs of points with entries `N(0, scale^2)`.
///
/// With `sigma = 0` pass `beta = 1` for the plain coercivity inequality.
pub fn check_coercivity(
    g: &dyn DifferentiableFn,
    l: f64,
    sigma: f64,
    beta: f64,
    trials: usize,
    scale: f64,
    seed: u64,
) -> CheckReport {
    let mut rng = stream(seed, Purpose::Checks, 0);
    let dim = g.dim();
    tally((0..trials).map(|_| {
        let w = draw(&mut rng, dim, scale);
        let w2 = draw(&mut rng, dim, scale);
        let (g1, g2) = (g.gradient(&w), g.gradient(&w2));
        let dw: Vec<f64> = w.iter().zip(&w2).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
        (
            dot(&dw, &dg),
            beta / l * dot(&dg, &dg) + (1.0 - beta) * sigma * dot(&dw, &dw),
        )
    }))
}

/// Checks `2 L f(w) >= ||f'(w)||^2` at `trials` random points.
pub fn check_self_bounding(
    f: &dyn DifferentiableFn,
    l: f64,
    trials: usize,
    scale: f64,
    seed: u64,
) -> CheckReport {
    let mut rng = stream(seed, Purpose::Checks, 1);
    let dim = f.dim();
    tally((0..trials).map(|_| {
        let w = draw(&mut rng, dim, scale);
        let grad = f.gradient(&w);
        (2.0 * l * f.value(&w), dot(&grad, &grad))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        dim: usize,
        curvature: f64,
    }

    impl DifferentiableFn for Quadratic {
        fn dim(&self) -> usize {
            self.dim
        }
        fn value(&self, w: &[f64]) -> f64 {
            0.5 * self.curvature * dot(w, w)
        }
        fn gradient(&self, w: &[f64]) -> Vec<f64> {
            w.iter().map(|x| self.curvature * x).collect()
        }
    }

    struct Constant(f64);

    impl DifferentiableFn for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, _: &[f64]) -> f64 {
            self.0
        }
        fn gradient(&self, _: &[f64]) -> Vec<f64> {
            vec![0.0; 3]
        }
    }

    #[test]
    fn identity_gradient_is_tight() {
        let q = Quadratic {
            dim: 4,
            curvature: 1.0,
        };
        let rep = check_coercivity(&q, 1.0, 0.0, 1.0, 200, 1.0, 3);
        assert!(rep.passed());
        assert!(rep.worst_margin.abs() < 1e-12);
    }

    #[test]
    fn too_small_l_is_caught() {
        let q = Quadratic {
            dim: 4,
            curvature: 2.0,
        };
        assert!(!check_coercivity(&q, 1.0, 0.0, 1.0, 50, 1.0, 3).passed());
        assert!(!check_self_bounding(&q, 1.0, 50, 1.0, 3).passed());
    }

    #[test]
    fn self_bounding_tight_and_constant() {
        let q = Quadratic {
            dim: 1,
            curvature: 3.0,
        };
        let rep = check_self_bounding(&q, 3.0, 100, 2.0, 1);
        assert!(rep.passed());
        assert!(rep.worst_margin.abs() < 1e-12);
        assert!(check_self_bounding(&Constant(0.7), 1.0, 10, 1.0, 1).passed());
    }

    #[test]
    fn strongly_convex_variant() {
        let q = Quadratic {
            dim: 3,
            curvature: 2.0,
        };
        assert!(check_coercivity(&q, 2.0, 2.0, 0.5, 100, 1.0, 5).passed());
        assert!(!check_coercivity(&q, 2.0, 4.0, 0.5, 100, 1.0, 5).passed());
    }
}
