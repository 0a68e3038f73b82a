//! Randomized coordinate descent, the pairwise SGD baseline, and a full-batch
//! gradient descent used to approximate empirical minimizers.
//!
//! Iterates are indexed from 1: `w_1` is the starting point and a run of `T`
//! iterations ends at `w_{T+1}`. Coordinate draws come from the
//! [`Purpose::Coordinates`] stream of the run seed and pair draws from the
//! [`Purpose::Pairs`] stream, so two runs with the same seed on neighboring
//! datasets consume identical randomness.

use rand::Rng;

use crate::error::{arg_err, Error, Result};
use crate::risk::RiskModel;
use crate::rng::{stream, Purpose};

/// Step sizes `eta_t` for `t = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `eta_t = eta / sqrt(horizon)`.
    Scaled {
        eta: f64,
        horizon: usize,
    },
    /// Explicit list; must cover every iteration of the run.
    Custom(Vec<f64>),
}

impl Schedule {
    /// `eta_t`, 1-based. A custom list repeats its last entry past its end.
    pub fn step(&self, t: usize) -> f64 {
        match self {
            Schedule::Constant(eta) => *eta,
            Schedule::Scaled { eta, horizon } => eta / (*horizon.max(&1) as f64).sqrt(),
            Schedule::Custom(list) => list[(t.max(1) - 1).min(list.len() - 1)],
        }
    }

    /// `[eta_1, ..., eta_T]`.
    pub fn steps(&self, iterations: usize) -> Vec<f64> {
        (1..=iterations).map(|t| self.step(t)).collect()
    }

    pub fn validate(&self, iterations: usize) -> Result<()> {
        let bad = |eta: f64| !(eta >= 0.0 && eta.is_finite());
        match self {
            Schedule::Constant(eta) | Schedule::Scaled { eta, .. } if bad(*eta) => {
                arg_err(format!("step size {eta} must be finite and >= 0"))
            }
            Schedule::Custom(list) if list.is_empty() || list.len() < iterations => {
                arg_err(format!(
                    "custom schedule has {} steps but the run needs {iterations}",
                    list.len()
                ))
            }
            Schedule::Custom(list) if list.iter().any(|&e| bad(e)) => {
                arg_err("custom step sizes must be finite and >= 0")
            }
            _ => Ok(()),
        }
    }

    pub fn is_nonincreasing(&self, iterations: usize) -> bool {
        self.steps(iterations).windows(2).all(|w| w[1] <= w[0])
    }
}

/// Settings shared by both optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule: Schedule,
    pub iterations: usize,
    pub seed: u64,
    /// Record `w_t` when `(t - 1) % record_every == 0`, plus the final iterate.
    pub record_every: usize,
    /// Evaluate `F_S` at recorded iterates. When off, `Trajectory::risks` stays empty.
    pub track_risk: bool,
}

impl RunConfig {
    pub fn new(schedule: Schedule, iterations: usize, seed: u64) -> Self {
        RunConfig {
            schedule,
            iterations,
            seed,
            record_every: 1,
            track_risk: true,
        }
    }

    pub fn without_risk(mut self) -> Self {
        self.track_risk = false;
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.record_every == 0 {
            return arg_err("record_every must be at least 1");
        }
        self.schedule.validate(self.iterations)
    }

    fn records(&self, t: usize) -> bool {
        (t - 1).is_multiple_of(self.record_every) || t == self.iterations + 1
    }
}

/// Randomness consumed by a run: coordinates (0-based) or ordered example pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Draws {
    Coordinates(Vec<u32>),
    Pairs(Vec<(u32, u32)>),
}

impl Draws {
    pub fn len(&self) -> usize {
        match self {
            Draws::Coordinates(v) => v.len(),
            Draws::Pairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Iterate indices of the recorded points, starting at 1.
    pub ts: Vec<usize>,
    pub iterates: Vec<Vec<f64>>,
    /// `F_S` at each recorded iterate.
    pub risks: Vec<f64>,
    pub draws: Draws,
    pub seed: u64,
}

impl Trajectory {
    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("trajectory holds at least w_1")
    }

    /// `F_S` at the last recorded iterate, if risks were tracked.
    pub fn final_risk(&self) -> Option<f64> {
        self.risks.last().copied()
    }
}

/// Passes over the data completed before iterate `t`: `(t - 1) / n`.
pub fn passes(t: usize, n: usize) -> f64 {
    (t - 1) as f64 / n as f64
}

fn check_start(m: &RiskModel, w1: &[f64]) -> Result<()> {
    if w1.len() != m.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.param_dim(),
            got: w1.len(),
        });
    }
    Ok(())
}

fn rcd_core(
    m: &RiskModel,
    w1: &[f64],
    cfg: &RunConfig,
    mut draw: impl FnMut(usize) -> Result<usize>,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(m, w1)?;
    let mut cache = m.new_cache(w1)?;
    let mut traj = Trajectory {
        ts: vec![1],
        iterates: vec![w1.to_vec()],
        risks: Vec::new(),
        draws: Draws::Coordinates(Vec::new()),
        seed: cfg.seed,
    };
    if cfg.track_risk {
        let risk = m.risk_from_cache(&cache);
        if !risk.is_finite() {
            return Err(Error::Diverged { iteration: 1 });
        }
        traj.risks.push(risk);
    }
    let mut coords = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let k = draw(t)?;
        coords.push(k as u32);
        let delta = -cfg.schedule.step(t) * m.cached_partial(k, &cache);
        m.commit_coordinate_step(&mut cache, k, delta);
        if !cache.w()[k].is_finite() {
            return Err(Error::Diverged { iteration: t });
        }
        if cfg.records(t + 1) {
            if cfg.track_risk {
                let risk = m.risk_from_cache(&cache);
                if !risk.is_finite() {
                    return Err(Error::Diverged { iteration: t });
                }
                traj.risks.push(risk);
            }
            traj.ts.push(t + 1);
            traj.iterates.push(cache.w().to_vec());
        }
    }
    traj.draws = Draws::Coordinates(coords);
    Ok(traj)
}

/// Randomized coordinate descent: `w_{t+1} = w_t - eta_t * d_{i_t} F_S(w_t) e_{i_t}`
/// with `i_t` uniform over the parameter coordinates.
pub fn rcd_run(m: &RiskModel, w1: &[f64], cfg: &RunConfig) -> Result<Trajectory> {
    let d = m.param_dim();
    let mut rng = stream(cfg.seed, Purpose::Coordinates, 0);
    rcd_core(m, w1, cfg, |_| Ok(rng.random_range(0..d)))
}

/// RCD driven by an explicit coordinate sequence (one draw per iteration).
pub fn rcd_replay(m: &RiskModel, w1: &[f64], cfg: &RunConfig, draws: &[u32]) -> Result<Trajectory> {
    if draws.len() != cfg.iterations {
        return arg_err(format!(
            "{} draws supplied for {} iterations",
            draws.len(),
            cfg.iterations
        ));
    }
    let d = m.param_dim();
    rcd_core(m, w1, cfg, |t| match draws[t - 1] as usize {
        k if k < d => Ok(k),
        k => arg_err(format!(
            "coordinate draw {k} out of range for dimension {d}"
        )),
    })
}

fn sgd_core(
    m: &RiskModel,
    w1: &[f64],
    cfg: &RunConfig,
    mut draw: impl FnMut(usize) -> Result<(usize, usize)>,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(m, w1)?;
    let mut w = w1.to_vec();
    let mut traj = Trajectory {
        ts: vec![1],
        iterates: vec![w.clone()],
        risks: Vec::new(),
        draws: Draws::Pairs(Vec::new()),
        seed: cfg.seed,
    };
    if cfg.track_risk {
        let risk = m.empirical_risk(&w)?;
        if !risk.is_finite() {
            return Err(Error::Diverged { iteration: 1 });
        }
        traj.risks.push(risk);
    }
    let mut pairs = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let (i, j) = draw(t)?;
        pairs.push((i as u32, j as u32));
        let eta = cfg.schedule.step(t);
        let g = m.pair_gradient(&w, i, j)?;
        for (wk, gk) in w.iter_mut().zip(&g) {
            *wk -= eta * gk;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: t });
        }
        if cfg.records(t + 1) {
            if cfg.track_risk {
                let risk = m.empirical_risk(&w)?;
                if !risk.is_finite() {
                    return Err(Error::Diverged { iteration: t });
                }
                traj.risks.push(risk);
            }
            traj.ts.push(t + 1);
            traj.iterates.push(w.clone());
        }
    }
    traj.draws = Draws::Pairs(pairs);
    Ok(traj)
}

/// Pairwise SGD: draw an ordered pair `i != j` uniformly and step along
/// `-(grad f(w; z_i, z_j) + lambda w)`.
pub fn sgd_pairwise_run(m: &RiskModel, w1: &[f64], cfg: &RunConfig) -> Result<Trajectory> {
    let n = m.n();
    let mut rng = stream(cfg.seed, Purpose::Pairs, 0);
    sgd_core(m, w1, cfg, |_| {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        Ok((i, j))
    })
}

/// Pairwise SGD driven by explicit (0-based) pair draws.
pub fn sgd_replay(
    m: &RiskModel,
    w1: &[f64],
    cfg: &RunConfig,
    draws: &[(u32, u32)],
) -> Result<Trajectory> {
    if draws.len() != cfg.iterations {
        return arg_err(format!(
            "{} draws supplied for {} iterations",
            draws.len(),
            cfg.iterations
        ));
    }
    let n = m.n();
    sgd_core(m, w1, cfg, |t| match draws[t - 1] {
        (i, j) if i != j && (i as usize) < n && (j as usize) < n => Ok((i as usize, j as usize)),
        (i, j) => arg_err(format!("pair draw ({i}, {j}) invalid for {n} examples")),
    })
}

/// Replays a trajectory's recorded draws through the matching update rule.
pub fn replay(m: &RiskModel, w1: &[f64], cfg: &RunConfig, draws: &Draws) -> Result<Trajectory> {
    match draws {
        Draws::Coordinates(c) => rcd_replay(m, w1, cfg, c),
        Draws::Pairs(p) => sgd_replay(m, w1, cfg, p),
    }
}

/// Largest `|(1/d) d_k F_S(w) - (1/d) [grad F_S(w)]_k|` over all coordinates `k`,
/// i.e. how far the exact expectation of the RCD direction is from `(1/d) grad F_S`.
pub fn unbiasedness_check(m: &RiskModel, w: &[f64]) -> Result<f64> {
    let full = m.full_gradient(w)?;
    let cache = m.new_cache(w)?;
    let d = m.param_dim() as f64;
    let mut worst: f64 = 0.0;
    for (k, &g) in full.iter().enumerate() {
        let expected = m.coordinate_gradient(w, k, &cache)? / d;
        worst = worst.max((expected - g / d).abs());
    }
    Ok(worst)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `iterations` steps of full-batch gradient descent with a fixed step.
pub fn gradient_descent(
    m: &RiskModel,
    w0: &[f64],
    step: f64,
    iterations: usize,
) -> Result<Vec<f64>> {
    let mut w = w0.to_vec();
    for it in 1..=iterations {
        let g = m.full_gradient(&w)?;
        for (wk, gk) in w.iter_mut().zip(&g) {
            *wk -= step * gk;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: it });
        }
    }
    Ok(w)
}

/// Approximate empirical minimizer `w_S`: gradient descent from 0 with step
/// `1/L` (smoothness of `F_S`) until `||grad F_S|| <= tol`.
pub fn minimize_to_tolerance(
    m: &RiskModel,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if tol.is_nan() || tol <= 0.0 {
        return arg_err(format!("tolerance must be positive, got {tol}"));
    }
    let smooth = match m.smoothness(seed) {
        Some(l) if l > 0.0 => l,
        Some(_) => {
            return Ok((
                vec![0.0; m.param_dim()],
                m.empirical_risk(&vec![0.0; m.param_dim()])?,
            ))
        }
        None => return arg_err("gradient descent needs a smooth loss"),
    };
    let step = 1.0 / smooth;
    let mut w = vec![0.0; m.param_dim()];
    let mut g = m.full_gradient(&w)?;
    let mut iterations = 0;
    while norm(&g) > tol {
        if iterations == max_iters {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: norm(&g),
            });
        }
        for (wk, gk) in w.iter_mut().zip(&g) {
            *wk -= step * gk;
        }
        iterations += 1;
        g = m.full_gradient(&w)?;
        if !norm(&g).is_finite() {
            return Err(Error::Diverged {
                iteration: iterations,
            });
        }
    }
    let risk = m.empirical_risk(&w)?;
    Ok((w, risk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Example};
    use crate::loss::PairwiseLoss;
    use crate::risk::PairPolicy;
    use std::sync::Arc;

    fn two_point(lambda: f64) -> RiskModel {
        let ds = Dataset::from_examples(
            "two",
            vec![
                Example::from_dense(&[1.0, 0.0], 1.0),
                Example::from_dense(&[0.0, 1.0], -1.0),
            ],
        );
        RiskModel::new(
            PairwiseLoss::from_key("auc-logistic").unwrap(),
            Arc::new(ds),
            lambda,
            PairPolicy::AllPairs,
        )
        .unwrap()
    }

    #[test]
    fn forced_rcd_step() {
        let m = two_point(0.0);
        let cfg = RunConfig::new(Schedule::Constant(1.0), 1, 0);
        let traj = rcd_replay(&m, &[0.0, 0.0], &cfg, &[0]).unwrap();
        assert_eq!(traj.final_iterate(), &[0.25, 0.0]);
    }

    #[test]
    fn forced_sgd_step() {
        let m = two_point(0.0);
        let cfg = RunConfig::new(Schedule::Constant(1.0), 1, 0);
        let traj = sgd_replay(&m, &[0.0, 0.0], &cfg, &[(0, 1)]).unwrap();
        assert_eq!(traj.final_iterate(), &[0.5, -0.5]);
    }

    #[test]
    fn zero_step_keeps_start() {
        let m = two_point(0.0);
        let cfg = RunConfig::new(Schedule::Constant(0.0), 50, 3);
        for traj in [
            rcd_run(&m, &[0.1, 0.2], &cfg).unwrap(),
            sgd_pairwise_run(&m, &[0.1, 0.2], &cfg).unwrap(),
        ] {
            assert!(traj.iterates.iter().all(|w| w == &[0.1, 0.2]));
            assert_eq!(traj.draws.len(), 50);
            assert_eq!(traj.ts.len(), 51);
        }
    }

    #[test]
    fn thinned_recording_keeps_ends() {
        let m = two_point(0.0);
        let cfg = RunConfig::new(Schedule::Constant(0.5), 10, 3).record_every(4);
        let traj = rcd_run(&m, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(traj.ts, vec![1, 5, 9, 11]);
    }

    #[test]
    fn zero_iterations() {
        let m = two_point(0.0);
        let traj = rcd_run(
            &m,
            &[0.0, 0.0],
            &RunConfig::new(Schedule::Constant(1.0), 0, 1),
        )
        .unwrap();
        assert_eq!(traj.ts, vec![1]);
        assert!(traj.draws.is_empty());
    }

    #[test]
    fn divergence_is_reported() {
        let m = two_point(1.0);
        let cfg = RunConfig::new(Schedule::Constant(1e308), 2000, 1);
        assert!(matches!(
            rcd_run(&m, &[1.0, 1.0], &cfg),
            Err(Error::Diverged { .. })
        ));
        assert!(matches!(
            sgd_pairwise_run(&m, &[1.0, 1.0], &cfg),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn schedules() {
        assert_eq!(
            Schedule::Scaled {
                eta: 4.0,
                horizon: 16
            }
            .step(3),
            1.0
        );
        assert_eq!(Schedule::Custom(vec![3.0, 2.0]).steps(2), vec![3.0, 2.0]);
        assert!(Schedule::Custom(vec![3.0]).validate(2).is_err());
        assert!(Schedule::Constant(-1.0).validate(1).is_err());
        assert!(!Schedule::Custom(vec![1.0, 2.0]).is_nonincreasing(2));
    }

    #[test]
    fn pure_quadratic_minimizer_is_zero() {
        let ds = Dataset::from_examples(
            "pos",
            vec![
                Example::from_dense(&[1.0, 2.0], 1.0),
                Example::from_dense(&[0.0, 1.0], 1.0),
            ],
        );
        let m = RiskModel::new(
            PairwiseLoss::from_key("auc-logistic").unwrap(),
            Arc::new(ds),
            0.5,
            PairPolicy::AllPairs,
        )
        .unwrap();
        let (w, f) = minimize_to_tolerance(&m, 1e-10, 10_000, 0).unwrap();
        assert_eq!(w, vec![0.0, 0.0]);
        assert_eq!(f, 0.0);
    }

    #[test]
    fn nonconvergence_carries_gradient_norm() {
        let m = two_point(0.0);
        match minimize_to_tolerance(&m, 1e-12, 3, 0) {
            Err(Error::NonConvergence {
                iterations: 3,
                grad_norm,
            }) => assert!(grad_norm > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
