//! Neighboring-dataset stability experiments and the excess-risk decomposition.

use std::sync::Arc;

use crate::data::{
    make_neighbor, random_index, Dataset, NeighborPair, Replacement, SyntheticSource,
};
use crate::error::{arg_err, Error, Result, Side};
use crate::loss::PairwiseLoss;
use crate::optim::{passes, rcd_run, sgd_pairwise_run, RunConfig, Schedule, Trajectory};
use crate::parallel::{map_indexed, Execution};
use crate::risk::{PairPolicy, RiskModel};
use crate::rng::{derive_seed, stream, Purpose};

/// Runs up to this length record every iterate; longer ones keep 1000 checkpoints.
pub const FULL_RECORD_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Rcd,
    Sgd,
}

impl Optimizer {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "rcd" => Ok(Optimizer::Rcd),
            "sgd" => Ok(Optimizer::Sgd),
            other => arg_err(format!("unknown optimizer `{other}` (rcd | sgd)")),
        }
    }

    pub fn run(self, m: &RiskModel, w1: &[f64], cfg: &RunConfig) -> Result<Trajectory> {
        match self {
            Optimizer::Rcd => rcd_run(m, w1, cfg),
            Optimizer::Sgd => sgd_pairwise_run(m, w1, cfg),
        }
    }
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Optimizer::Rcd => "rcd",
            Optimizer::Sgd => "sgd",
        })
    }
}

/// Everything needed to build a [`RiskModel`] on a given dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub loss: PairwiseLoss,
    pub reg_lambda: f64,
    pub pair_policy: PairPolicy,
}

impl ModelSpec {
    pub fn new(loss: PairwiseLoss, reg_lambda: f64) -> Self {
        ModelSpec {
            loss,
            reg_lambda,
            pair_policy: PairPolicy::AllPairs,
        }
    }

    pub fn build(&self, data: Arc<Dataset>) -> Result<RiskModel> {
        RiskModel::new(self.loss, data, self.reg_lambda, self.pair_policy)
    }
}

/// How the per-run schedule is derived from a grid value `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    Constant,
    /// `eta_t = eta / sqrt(T)`.
    #[default]
    Scaled,
}

impl StepRule {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "constant" => Ok(StepRule::Constant),
            "scaled" => Ok(StepRule::Scaled),
            other => arg_err(format!("unknown schedule `{other}` (constant | scaled)")),
        }
    }

    pub fn schedule(self, eta: f64, iterations: usize) -> Schedule {
        match self {
            StepRule::Constant => Schedule::Constant(eta),
            StepRule::Scaled => Schedule::Scaled {
                eta,
                horizon: iterations,
            },
        }
    }
}

impl std::fmt::Display for StepRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepRule::Constant => "constant",
            StepRule::Scaled => "scaled",
        })
    }
}

/// `record_every` for a run of `iterations` steps.
pub fn checkpoint_stride(iterations: usize) -> usize {
    if iterations <= FULL_RECORD_LIMIT {
        1
    } else {
        iterations.div_ceil(1000)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Two runs on `S` and `S_i` sharing all algorithmic randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRun {
    pub base: Trajectory,
    pub perturbed: Trajectory,
    /// `Delta_t = ||w_t - w_t'||` at each recorded `t`.
    pub deltas: Vec<f64>,
}

/// Runs `optimizer` from `w1` on both members of `pair` with the same seed.
pub fn paired_run(
    pair: &NeighborPair,
    spec: &ModelSpec,
    optimizer: Optimizer,
    w1: &[f64],
    cfg: &RunConfig,
    rep: usize,
) -> Result<PairedRun> {
    let tag = |which: Side| {
        move |e: Error| Error::PairedRun {
            which,
            rep,
            source: Box::new(e),
        }
    };
    let base_model = spec
        .build(Arc::clone(pair.base()))
        .map_err(tag(Side::Base))?;
    let pert_model = spec
        .build(Arc::clone(pair.perturbed()))
        .map_err(tag(Side::Perturbed))?;
    paired_run_on(&base_model, &pert_model, optimizer, w1, cfg, rep)
}

fn paired_run_on(
    base_model: &RiskModel,
    pert_model: &RiskModel,
    optimizer: Optimizer,
    w1: &[f64],
    cfg: &RunConfig,
    rep: usize,
) -> Result<PairedRun> {
    let tag = |which: Side| {
        move |e: Error| Error::PairedRun {
            which,
            rep,
            source: Box::new(e),
        }
    };
    let base = optimizer
        .run(base_model, w1, cfg)
        .map_err(tag(Side::Base))?;
    let perturbed = optimizer
        .run(pert_model, w1, cfg)
        .map_err(tag(Side::Perturbed))?;
    assert_eq!(
        base.draws, perturbed.draws,
        "paired runs must consume identical draws"
    );
    let deltas = base
        .iterates
        .iter()
        .zip(&perturbed.iterates)
        .map(|(a, b)| distance(a, b))
        .collect();
    Ok(PairedRun {
        base,
        perturbed,
        deltas,
    })
}

/// Settings of a stability sweep over a step-size grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub spec: ModelSpec,
    pub optimizer: Optimizer,
    pub etas: Vec<f64>,
    pub step_rule: StepRule,
    pub iterations: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub execution: Execution,
}

/// Seed-aggregated `Delta_t` for one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRecord {
    pub eta: f64,
    pub optimizer: Optimizer,
    pub loss: PairwiseLoss,
    pub ts: Vec<usize>,
    pub passes: Vec<f64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation across repetitions (0 for a single repetition).
    pub std: Vec<f64>,
    pub reps: usize,
}

impl StabilityRecord {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("record holds t = 1")
    }
}

/// Mean and sample standard deviation of each column of `rows`, folded in row order.
pub fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let reps = rows.len() as f64;
    let width = rows.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..width)
        .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / reps)
        .collect();
    let std = (0..width)
        .map(|c| {
            if rows.len() < 2 {
                return 0.0;
            }
            let ss: f64 = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum();
            (ss / (reps - 1.0)).sqrt()
        })
        .collect();
    (mean, std)
}

/// Repeats [`paired_run`] `reps` times for each step size in the grid.
///
/// Repetition `r` uses seed `derive_seed(master_seed, r)` for the perturbed
/// index, the replacement example and the algorithmic randomness; the same
/// neighboring pair is reused across the grid.
pub fn stability_experiment(
    data: &Arc<Dataset>,
    replacement: Replacement<'_>,
    cfg: &StabilityConfig,
) -> Result<Vec<StabilityRecord>> {
    if cfg.reps == 0 {
        return arg_err("reps must be at least 1");
    }
    if cfg.etas.is_empty() {
        return arg_err("step-size grid is empty");
    }
    let n = data.len();
    if n < 2 {
        return arg_err(format!(
            "stability experiments need at least 2 examples, got {n}"
        ));
    }
    let stride = checkpoint_stride(cfg.iterations);
    let w1 = vec![0.0; cfg.spec.loss.param_dim(data.dim())];
    type RepTrace = (Vec<usize>, Vec<Vec<f64>>);
    let per_rep: Vec<Result<RepTrace>> = map_indexed(cfg.execution, cfg.reps, |rep| {
        let seed = derive_seed(cfg.master_seed, rep as u64);
        let index = random_index(n, seed);
        let pair = make_neighbor(data, index, replacement, seed)?;
        let base_model = cfg.spec.build(Arc::clone(pair.base()))?;
        let pert_model = cfg.spec.build(Arc::clone(pair.perturbed()))?;
        let mut ts = Vec::new();
        let mut curves = Vec::with_capacity(cfg.etas.len());
        for &eta in &cfg.etas {
            let run_cfg = RunConfig::new(
                cfg.step_rule.schedule(eta, cfg.iterations),
                cfg.iterations,
                seed,
            )
            .record_every(stride)
            .without_risk();
            let run = paired_run_on(&base_model, &pert_model, cfg.optimizer, &w1, &run_cfg, rep)?;
            ts = run.base.ts;
            curves.push(run.deltas);
        }
        Ok((ts, curves))
    });
    let per_rep: Vec<(Vec<usize>, Vec<Vec<f64>>)> = per_rep.into_iter().collect::<Result<_>>()?;
    let ts = per_rep[0].0.clone();
    let pass_axis: Vec<f64> = ts.iter().map(|&t| passes(t, n)).collect();
    Ok(cfg
        .etas
        .iter()
        .enumerate()
        .map(|(e, &eta)| {
            let rows: Vec<Vec<f64>> = per_rep
                .iter()
                .map(|(_, curves)| curves[e].clone())
                .collect();
            let (mean, std) = column_stats(&rows);
            StabilityRecord {
                eta,
                optimizer: cfg.optimizer,
                loss: cfg.spec.loss,
                ts: ts.clone(),
                passes: pass_axis.clone(),
                mean,
                std,
                reps: cfg.reps,
            }
        })
        .collect())
}

/// Where training sets and replacement examples are drawn from.
#[derive(Debug, Clone, Copy)]
pub enum SampleSource<'a> {
    /// Training set: `n` examples without replacement; replacements from the rest.
    Pool(&'a Dataset),
    Synthetic(&'a SyntheticSource),
}

/// Settings for the on-average stability estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OnAverageConfig {
    pub spec: ModelSpec,
    pub optimizer: Optimizer,
    pub schedule: Schedule,
    pub iterations: usize,
    /// Training-set size.
    pub n: usize,
    /// Distinct indices `i` perturbed per repetition.
    pub sample_indices: usize,
    pub reps: usize,
    pub seed: u64,
    pub execution: Execution,
}

/// Monte-Carlo on-average argument stability, per recorded iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct OnAverageStability {
    pub ts: Vec<usize>,
    /// Mean of `||A(S) - A(S_i)||^2` over repetitions and sampled `i`.
    pub l2: Vec<f64>,
    /// Mean of `||A(S) - A(S_i)||`.
    pub l1: Vec<f64>,
    /// Seed-averaged `F_S(w_t)` of the unperturbed runs.
    pub mean_risk: Vec<f64>,
    /// Seed-averaged `F_S(w_1)`.
    pub start_risk: f64,
    /// Largest data-derived smoothness constant over the drawn training sets.
    pub smoothness: Option<f64>,
}

impl OnAverageStability {
    pub fn final_l2(&self) -> f64 {
        *self.l2.last().expect("at least one recorded iterate")
    }
}

fn draw_training_set(
    source: SampleSource<'_>,
    n: usize,
    seed: u64,
) -> Result<(Arc<Dataset>, Option<Dataset>)> {
    match source {
        SampleSource::Synthetic(src) => Ok((Arc::new(src.dataset(n, seed, "sample")?), None)),
        SampleSource::Pool(pool) => {
            if pool.len() <= n {
                return arg_err(format!(
                    "pool of {} examples cannot supply n = {n} plus replacements",
                    pool.len()
                ));
            }
            let mut order = rand::seq::index::sample(
                &mut stream(seed, Purpose::Split, 1),
                pool.len(),
                pool.len(),
            )
            .into_vec();
            let rest = order.split_off(n);
            Ok((
                Arc::new(pool.select(&order, "sample")),
                Some(pool.select(&rest, "replacements")),
            ))
        }
    }
}

/// Largest smoothness of `F_S` over the training sets [`on_average_l2_stability`]
/// will draw for `cfg`; lets callers pick step sizes before running. `None` for hinge links.
pub fn on_average_smoothness(
    source: SampleSource<'_>,
    cfg: &OnAverageConfig,
) -> Result<Option<f64>> {
    let per_rep: Vec<Result<Option<f64>>> = map_indexed(cfg.execution, cfg.reps, |rep| {
        let seed = derive_seed(cfg.seed, rep as u64);
        let (train, _) = draw_training_set(source, cfg.n, seed)?;
        Ok(cfg.spec.build(train)?.smoothness(seed))
    });
    per_rep.into_iter().try_fold(Some(0.0f64), |acc, l| {
        Ok(acc.zip(l?).map(|(a, b)| a.max(b)))
    })
}

/// Estimates `E (1/n) sum_i ||A(S) - A(S_i)||^2` and its l1 analogue.
///
/// Each repetition draws a fresh `S`, runs the optimizer once on `S` and once
/// on each `S_i` for `sample_indices` distinct random `i`, all with the same
/// algorithmic seed. Every iterate is recorded.
pub fn on_average_l2_stability(
    source: SampleSource<'_>,
    cfg: &OnAverageConfig,
) -> Result<OnAverageStability> {
    if cfg.reps == 0 {
        return arg_err("reps must be at least 1");
    }
    if cfg.sample_indices == 0 || cfg.sample_indices > cfg.n {
        return arg_err(format!("sample_indices must lie in 1..={}", cfg.n));
    }
    let dim = match source {
        SampleSource::Pool(p) => p.dim(),
        SampleSource::Synthetic(s) => s.dim(),
    };
    let w1 = vec![0.0; cfg.spec.loss.param_dim(dim)];
    type RepResult = (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>, Option<f64>);
    let per_rep: Vec<Result<RepResult>> = map_indexed(cfg.execution, cfg.reps, |rep| {
        let seed = derive_seed(cfg.seed, rep as u64);
        let (train, pool) = draw_training_set(source, cfg.n, seed)?;
        let replacement = match (&pool, source) {
            (Some(p), _) => Replacement::Pool(p),
            (None, SampleSource::Synthetic(s)) => Replacement::Synthetic(s),
            (None, SampleSource::Pool(_)) => {
                unreachable!("pool sources always yield a replacement pool")
            }
        };
        let base_model = cfg.spec.build(Arc::clone(&train))?;
        let run_cfg = RunConfig::new(cfg.schedule.clone(), cfg.iterations, seed);
        let base = cfg
            .optimizer
            .run(&base_model, &w1, &run_cfg)
            .map_err(|e| Error::PairedRun {
                which: Side::Base,
                rep,
                source: Box::new(e),
            })?;
        let indices = rand::seq::index::sample(
            &mut stream(seed, Purpose::Perturbation, 2),
            cfg.n,
            cfg.sample_indices,
        );
        let mut l2 = vec![0.0; base.ts.len()];
        let mut l1 = vec![0.0; base.ts.len()];
        for (slot, i) in indices.into_iter().enumerate() {
            let pair = make_neighbor(&train, i, replacement, derive_seed(seed, slot as u64 + 1))?;
            let pert_model = cfg.spec.build(Arc::clone(pair.perturbed()))?;
            let pert = cfg
                .optimizer
                .run(&pert_model, &w1, &run_cfg.clone().without_risk())
                .map_err(|e| Error::PairedRun {
                    which: Side::Perturbed,
                    rep,
                    source: Box::new(e),
                })?;
            for (k, (a, b)) in base.iterates.iter().zip(&pert.iterates).enumerate() {
                let dist = distance(a, b);
                l2[k] += dist * dist;
                l1[k] += dist;
            }
        }
        let s = cfg.sample_indices as f64;
        l2.iter_mut().chain(l1.iter_mut()).for_each(|v| *v /= s);
        Ok((base.ts, l2, l1, base.risks, base_model.smoothness(seed)))
    });
    let per_rep: Vec<RepResult> = per_rep.into_iter().collect::<Result<_>>()?;
    let reps = cfg.reps as f64;
    let width = per_rep[0].1.len();
    let avg = |pick: fn(&RepResult) -> &Vec<f64>| -> Vec<f64> {
        (0..width)
            .map(|k| per_rep.iter().map(|r| pick(r)[k]).sum::<f64>() / reps)
            .collect()
    };
    let l2 = avg(|r| &r.1);
    let l1 = avg(|r| &r.2);
    let mean_risk = avg(|r| &r.3);
    let smoothness = per_rep
        .iter()
        .map(|r| r.4)
        .try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)));
    Ok(OnAverageStability {
        ts: per_rep[0].0.clone(),
        l2,
        l1,
        start_risk: mean_risk[0],
        mean_risk,
        smoothness,
    })
}

/// Estimation and optimization error of an output `w_out`, measured against a held-out set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskDecomposition {
    /// All-pairs risk on the held-out set (population-risk proxy).
    pub test_risk: f64,
    pub train_risk: f64,
    /// `F_S(w_S)`.
    pub minimum_risk: f64,
    pub estimation_error: f64,
    pub optimization_error: f64,
    pub excess: f64,
}

pub fn risk_decomposition(
    m: &RiskModel,
    test: &Arc<Dataset>,
    w_out: &[f64],
    w_s: &[f64],
) -> Result<RiskDecomposition> {
    if test.len() < 2 {
        return arg_err(format!(
            "held-out set needs at least 2 examples, got {}",
            test.len()
        ));
    }
    let test_model = RiskModel::new(
        m.loss(),
        Arc::clone(test),
        m.reg_lambda(),
        PairPolicy::AllPairs,
    )?;
    let test_risk = test_model.empirical_risk(w_out)?;
    let train_risk = m.empirical_risk(w_out)?;
    let minimum_risk = m.empirical_risk(w_s)?;
    let estimation_error = test_risk - train_risk;
    let optimization_error = train_risk - minimum_risk;
    Ok(RiskDecomposition {
        test_risk,
        train_risk,
        minimum_risk,
        estimation_error,
        optimization_error,
        excess: estimation_error + optimization_error,
    })
}
