use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pairwise_rcd::bounds::{self, BoundInputs, BoundReport};
use pairwise_rcd::data::{
    ground_truth, load_libsvm, parse_libsvm_str, split, to_libsvm_string, FeatureModel, LabelRule,
    Replacement, SyntheticSource,
};
use pairwise_rcd::optim::{minimize_to_tolerance, passes, RunConfig};
use pairwise_rcd::parallel::map_indexed;
use pairwise_rcd::rng::derive_seed;
use pairwise_rcd::stability::{
    checkpoint_stride, on_average_l2_stability, on_average_smoothness, stability_experiment,
    ModelSpec, OnAverageConfig, Optimizer, SampleSource, StabilityConfig, StabilityRecord,
    StepRule,
};
use pairwise_rcd::{Dataset, Error, Execution, PairPolicy, PairwiseLoss, Schedule};

use crate::config::{parse_pairs, Config};
use crate::output::{num, OutputDir};
use crate::plot::{line_chart, Series};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stability,
    Compare,
    Convergence,
    Bounds,
    ParseCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stability => "stability",
            Command::Compare => "compare",
            Command::Convergence => "convergence",
            Command::Bounds => "bounds",
            Command::ParseCheck => "parse-check",
        }
    }
}

/// Files written and human-readable summary lines.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

pub const STABILITY_HEADER: [&str; 8] = [
    "eta",
    "optimizer",
    "loss",
    "t",
    "passes",
    "delta_mean",
    "delta_std",
    "reps",
];
pub const CONVERGENCE_HEADER: [&str; 8] = [
    "t",
    "passes",
    "mean_risk",
    "reference_risk",
    "gap",
    "optimization_rhs",
    "contraction_rhs",
    "gap_ratio",
];
/// Gaps below this fraction of `max(1, F_S(w_S))` are treated as converged: their
/// ratios reflect floating-point noise rather than contraction.
pub const GAP_RESOLUTION: f64 = 1e-10;

pub const BOUNDS_HEADER: [&str; 5] = ["bound_id", "t", "rhs", "empirical", "ratio"];

#[derive(Debug, Clone)]
enum DataSpec {
    Synthetic {
        n: usize,
        dim: usize,
        features: FeatureModel,
        linear_labels: bool,
        seed: u64,
    },
    File {
        path: PathBuf,
        dim: Option<usize>,
        max_n: usize,
        seed: u64,
    },
}

/// Every configuration value, parsed and checked before anything runs.
#[derive(Debug, Clone)]
struct Settings {
    data: DataSpec,
    loss: PairwiseLoss,
    optimizer: Optimizer,
    etas: Vec<f64>,
    step_rule: StepRule,
    passes: f64,
    iterations: Option<usize>,
    reps: usize,
    seed: u64,
    reg_lambda: f64,
    pair_policy: PairPolicy,
    execution: Execution,
    compare_eta: f64,
    eta: Option<f64>,
    tol: f64,
    max_iters: usize,
    beta: f64,
    gamma: Option<f64>,
    sample_indices: usize,
    measured: Option<PathBuf>,
}

fn invalid(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn step_size(v: f64, key: &str) -> Result<f64, CliError> {
    require(v.is_finite() && v >= 0.0, || {
        format!("`{key}` must be finite and >= 0, got {v}")
    })?;
    Ok(v)
}

impl Settings {
    fn from_config(cfg: &Config) -> Result<Self, CliError> {
        let data = match cfg.raw("data") {
            "synthetic" => {
                let features = match cfg.raw("synth_features") {
                    "gaussian" => FeatureModel::Gaussian,
                    other => {
                        let active = other
                            .strip_prefix("sparse:")
                            .and_then(|k| k.parse().ok())
                            .ok_or_else(|| {
                                CliError::Config(format!("invalid synth_features `{other}`"))
                            })?;
                        FeatureModel::SparseBinary { active }
                    }
                };
                let linear_labels = match cfg.raw("synth_labels") {
                    "balanced" => false,
                    "linear" => true,
                    other => {
                        return Err(CliError::Config(format!("invalid synth_labels `{other}`")))
                    }
                };
                DataSpec::Synthetic {
                    n: cfg.get("synth_n")?,
                    dim: cfg.get("synth_d")?,
                    features,
                    linear_labels,
                    seed: cfg.get("data_seed")?,
                }
            }
            path => DataSpec::File {
                path: PathBuf::from(path),
                dim: cfg.get_opt("dim")?,
                max_n: cfg.get("max_n")?,
                seed: cfg.get("data_seed")?,
            },
        };
        let execution = match cfg.raw("execution") {
            "parallel" => Execution::Parallel,
            "sequential" => Execution::Sequential,
            other => return Err(CliError::Config(format!("invalid execution `{other}`"))),
        };
        let s = Settings {
            data,
            loss: PairwiseLoss::from_key(cfg.raw("loss")).map_err(invalid)?,
            optimizer: Optimizer::parse(cfg.raw("optimizer")).map_err(invalid)?,
            etas: cfg.get_list("etas")?,
            step_rule: StepRule::parse(cfg.raw("schedule")).map_err(invalid)?,
            passes: cfg.get("passes")?,
            iterations: cfg.get_opt("iterations")?,
            reps: cfg.get("reps")?,
            seed: cfg.get("seed")?,
            reg_lambda: cfg.get("reg_lambda")?,
            pair_policy: PairPolicy::parse(cfg.raw("pair_policy")).map_err(invalid)?,
            execution,
            compare_eta: cfg.get("compare_eta")?,
            eta: cfg.get_opt("eta")?,
            tol: cfg.get("tol")?,
            max_iters: cfg.get("max_iters")?,
            beta: cfg.get("beta")?,
            gamma: cfg.get_opt("gamma")?,
            sample_indices: cfg.get("sample_indices")?,
            measured: cfg.get_opt::<String>("measured")?.map(PathBuf::from),
        };
        require(!s.etas.is_empty(), || "`etas` is empty".into())?;
        for &eta in &s.etas {
            step_size(eta, "etas")?;
        }
        step_size(s.compare_eta, "compare_eta")?;
        if let Some(eta) = s.eta {
            step_size(eta, "eta")?;
        }
        require(s.passes.is_finite() && s.passes >= 0.0, || {
            format!("`passes` must be >= 0, got {}", s.passes)
        })?;
        require(s.reps >= 1, || "`reps` must be at least 1".into())?;
        require(s.reg_lambda.is_finite() && s.reg_lambda >= 0.0, || {
            format!("`reg_lambda` must be >= 0, got {}", s.reg_lambda)
        })?;
        require(s.beta > 0.0 && s.beta < 1.0, || {
            format!("`beta` must lie in (0, 1), got {}", s.beta)
        })?;
        require(s.tol > 0.0, || {
            format!("`tol` must be positive, got {}", s.tol)
        })?;
        require(s.sample_indices >= 1, || {
            "`sample_indices` must be at least 1".into()
        })?;
        if let Some(g) = s.gamma {
            require(g > 0.0 && g.is_finite(), || {
                format!("`gamma` must be positive, got {g}")
            })?;
        }
        if let DataSpec::Synthetic { n, dim, .. } = s.data {
            require(n >= 2 && dim >= 1, || {
                "synthetic data needs synth_n >= 2 and synth_d >= 1".into()
            })?;
        }
        Ok(s)
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec {
            loss: self.loss,
            reg_lambda: self.reg_lambda,
            pair_policy: self.pair_policy,
        }
    }

    fn iterations(&self, n: usize) -> usize {
        self.iterations
            .unwrap_or((self.passes * n as f64).round() as usize)
    }
}

/// Share of a data file used for training; replacements come from the rest.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Training set plus the distribution replacement examples are drawn from.
struct Loaded {
    train: Arc<Dataset>,
    pool: Option<Dataset>,
    /// Whole file, from which on-average estimates draw their own splits.
    all: Option<Dataset>,
    source: Option<SyntheticSource>,
}

impl Loaded {
    fn load(spec: &DataSpec) -> Result<Self, CliError> {
        match spec {
            DataSpec::Synthetic {
                n,
                dim,
                features,
                linear_labels,
                seed,
            } => {
                let rule = if *linear_labels {
                    LabelRule::SignOfLinear(ground_truth(*dim, *seed))
                } else {
                    LabelRule::BalancedRandom
                };
                let source = SyntheticSource::new(*dim, features.clone(), rule).map_err(invalid)?;
                let train = source.dataset(*n, *seed, "synthetic")?;
                Ok(Loaded {
                    train: Arc::new(train),
                    pool: None,
                    all: None,
                    source: Some(source),
                })
            }
            DataSpec::File {
                path,
                dim,
                max_n,
                seed,
            } => {
                let full = load_libsvm(path, *dim)?;
                let (train, held_out) = split(&full, TRAIN_FRACTION, *seed)?;
                let pool = if held_out.is_empty() {
                    full.clone()
                } else {
                    held_out
                };
                Ok(Loaded {
                    train: Arc::new(train.subsample(*max_n, *seed)),
                    pool: Some(pool),
                    all: Some(full),
                    source: None,
                })
            }
        }
    }

    fn replacement(&self) -> Replacement<'_> {
        match (&self.pool, &self.source) {
            (Some(pool), _) => Replacement::Pool(pool),
            (None, Some(src)) => Replacement::Synthetic(src),
            (None, None) => unreachable!("loaded data always has a replacement source"),
        }
    }

    /// Source and training-set size for on-average estimates.
    fn sample_source(&self) -> (SampleSource<'_>, usize) {
        match (&self.all, &self.source) {
            (Some(all), _) => (
                SampleSource::Pool(all),
                self.train.len().min(all.len() * 4 / 5),
            ),
            (None, Some(src)) => (SampleSource::Synthetic(src), self.train.len()),
            (None, None) => unreachable!("loaded data always has a replacement source"),
        }
    }
}

pub fn run(cmd: Command, cfg: &Config) -> Result<Outcome, CliError> {
    let settings = Settings::from_config(cfg)?;
    let out = || OutputDir::create(cfg.out_dir(), cfg.provenance(cmd.name()));
    match cmd {
        Command::Stability => cmd_stability(&settings, &out()?),
        Command::Compare => cmd_compare(&settings, &out()?),
        Command::Convergence => cmd_convergence(&settings, &out()?),
        Command::Bounds => cmd_bounds(&settings, &out()?),
        Command::ParseCheck => cmd_parse_check(&settings, &out()?),
    }
}

fn stability_rows(records: &[StabilityRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .flat_map(|r| {
            (0..r.ts.len()).map(move |k| {
                vec![
                    num(r.eta),
                    r.optimizer.to_string(),
                    r.loss.to_string(),
                    r.ts[k].to_string(),
                    num(r.passes[k]),
                    num(r.mean[k]),
                    num(r.std[k]),
                    r.reps.to_string(),
                ]
            })
        })
        .collect()
}

fn sweep(
    s: &Settings,
    data: &Loaded,
    optimizer: Optimizer,
    etas: Vec<f64>,
) -> Result<Vec<StabilityRecord>, CliError> {
    let cfg = StabilityConfig {
        spec: s.spec(),
        optimizer,
        etas,
        step_rule: s.step_rule,
        iterations: s.iterations(data.train.len()),
        reps: s.reps,
        master_seed: s.seed,
        execution: s.execution,
    };
    Ok(stability_experiment(&data.train, data.replacement(), &cfg)?)
}

fn cmd_stability(s: &Settings, out: &OutputDir) -> Result<Outcome, CliError> {
    let data = Loaded::load(&s.data)?;
    let records = sweep(s, &data, s.optimizer, s.etas.clone())?;
    let mut outcome = Outcome::default();
    outcome.files.push(out.write_csv(
        "stability.csv",
        &STABILITY_HEADER,
        &stability_rows(&records),
    )?);
    for r in &records {
        let series = Series::with_std(
            format!("{} eta={}", r.optimizer, r.eta),
            r.passes.clone(),
            r.mean.clone(),
            &r.std,
        );
        let title = format!(
            "{} on {} ({}, eta = {})",
            r.optimizer,
            data.train.name(),
            r.loss,
            r.eta
        );
        let svg = line_chart(&title, "passes (t/n)", "mean delta_t", &[series]);
        outcome
            .files
            .push(out.write_svg(&format!("stability_eta_{}.svg", file_label(r.eta)), &svg)?);
        outcome.summary.push(format!(
            "eta={} final mean delta={}",
            r.eta,
            num(r.final_mean())
        ));
    }
    Ok(outcome)
}

/// Short, filesystem-safe rendering of a grid value.
fn file_label(eta: f64) -> String {
    let plain = num(eta);
    if plain.len() <= 12 {
        plain
    } else {
        format!("{eta:e}")
    }
}

fn cmd_compare(s: &Settings, out: &OutputDir) -> Result<Outcome, CliError> {
    let data = Loaded::load(&s.data)?;
    let mut records = sweep(s, &data, Optimizer::Rcd, vec![s.compare_eta])?;
    records.extend(sweep(s, &data, Optimizer::Sgd, vec![s.compare_eta])?);
    let mut outcome = Outcome::default();
    outcome.files.push(out.write_csv(
        "compare.csv",
        &STABILITY_HEADER,
        &stability_rows(&records),
    )?);
    let series: Vec<Series> = records
        .iter()
        .map(|r| {
            Series::with_std(
                r.optimizer.to_string(),
                r.passes.clone(),
                r.mean.clone(),
                &r.std,
            )
        })
        .collect();
    let title = format!(
        "rcd vs sgd on {} ({}, eta = {})",
        data.train.name(),
        s.loss,
        s.compare_eta
    );
    outcome.files.push(out.write_svg(
        "compare.svg",
        &line_chart(&title, "passes (t/n)", "mean delta_t", &series),
    )?);
    outcome.summary.extend(
        records
            .iter()
            .map(|r| format!("{} final mean delta={}", r.optimizer, num(r.final_mean()))),
    );
    Ok(outcome)
}

fn require_eta(eta: Option<f64>, loss: PairwiseLoss) -> Result<f64, CliError> {
    eta.ok_or_else(|| {
        CliError::Config(format!(
            "`eta` must be set: loss `{loss}` has no smoothness constant"
        ))
    })
}

fn cmd_convergence(s: &Settings, out: &OutputDir) -> Result<Outcome, CliError> {
    let data = Loaded::load(&s.data)?;
    let n = data.train.len();
    let model = s.spec().build(Arc::clone(&data.train))?;
    let dim = model.param_dim();
    let iterations = s.iterations(n);
    let default_eta = match s.optimizer {
        Optimizer::Rcd => model.coordinate_smoothness(),
        Optimizer::Sgd => model.smoothness(s.seed),
    }
    .filter(|l| *l > 0.0)
    .map(|l| 0.5 / l);
    let eta = require_eta(s.eta.or(default_eta), s.loss)?;
    let schedule = s.step_rule.schedule(eta, iterations);
    let stride = checkpoint_stride(iterations);
    let w1 = vec![0.0; dim];
    let runs = map_indexed(s.execution, s.reps, |r| {
        let cfg = RunConfig::new(schedule.clone(), iterations, derive_seed(s.seed, r as u64))
            .record_every(stride);
        s.optimizer.run(&model, &w1, &cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let ts = runs[0].ts.clone();
    let mean_risk: Vec<f64> = (0..ts.len())
        .map(|k| runs.iter().map(|r| r.risks[k]).sum::<f64>() / s.reps as f64)
        .collect();
    let (w_s, f_s) = minimize_to_tolerance(&model, s.tol, s.max_iters, s.seed)?;
    let dist: f64 = w1.iter().zip(&w_s).map(|(a, b)| (a - b) * (a - b)).sum();
    let steps = schedule.steps(iterations + 1);
    let inputs = BoundInputs {
        d: Some(dim),
        steps: Some(steps.clone()),
        start_distance_sq: Some(dist),
        start_risk: Some(mean_risk[0]),
        sigma: (s.reg_lambda > 0.0).then_some(s.reg_lambda),
        ..Default::default()
    };
    let opt_rhs = bounds::optimization_bound(&inputs).ok();
    let factors = if s.reg_lambda > 0.0 {
        Some(bounds::contraction_factors(&inputs)?)
    } else {
        None
    };

    let gap: Vec<f64> = mean_risk.iter().map(|f| f - f_s).collect();
    let mut rows = Vec::with_capacity(ts.len());
    let mut worst_opt: f64 = 0.0;
    let mut worst_contraction: f64 = 0.0;
    let floor = GAP_RESOLUTION * f_s.abs().max(1.0);
    for (k, &t) in ts.iter().enumerate() {
        let opt = opt_rhs.as_ref().map(|v| v[t - 1]);
        if let Some(rhs) = opt {
            worst_opt = worst_opt.max(gap[k] / rhs);
        }
        let (contraction, ratio) = match (&factors, k) {
            (Some(f), k) if k > 0 && gap[k - 1] > floor => {
                let rhs: f64 = f[ts[k - 1] - 1..t - 1].iter().product();
                let ratio = gap[k] / gap[k - 1];
                worst_contraction = worst_contraction.max(ratio / rhs);
                (Some(rhs), Some(ratio))
            }
            _ => (None, None),
        };
        let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
        rows.push(vec![
            t.to_string(),
            num(passes(t, n)),
            num(mean_risk[k]),
            num(f_s),
            num(gap[k]),
            cell(opt),
            cell(contraction),
            cell(ratio),
        ]);
    }
    let mut outcome = Outcome::default();
    outcome
        .files
        .push(out.write_csv("convergence.csv", &CONVERGENCE_HEADER, &rows)?);
    let x: Vec<f64> = ts.iter().map(|&t| passes(t, n)).collect();
    let mut series = vec![Series {
        name: "mean gap".into(),
        x: x.clone(),
        y: gap.clone(),
        band: None,
    }];
    if let Some(rhs) = &opt_rhs {
        series.push(Series {
            name: "optimization bound".into(),
            x,
            y: ts
                .iter()
                .map(|&t| rhs[t - 1].min(gap[0].max(mean_risk[0]) * 2.0))
                .collect(),
            band: None,
        });
    }
    let title = format!(
        "{} on {} ({}, eta = {eta})",
        s.optimizer,
        data.train.name(),
        s.loss
    );
    outcome.files.push(out.write_svg(
        "convergence.svg",
        &line_chart(&title, "passes (t/n)", "F_S(w_t) - F_S(w_S)", &series),
    )?);
    outcome
        .summary
        .push(format!("eta={eta} reference risk={}", num(f_s)));
    outcome
        .summary
        .push(format!("final mean gap={}", num(*gap.last().unwrap())));
    if opt_rhs.is_some() {
        outcome
            .summary
            .push(format!("max gap / optimization bound={}", num(worst_opt)));
    }
    if factors.is_some() {
        outcome.summary.push(format!(
            "max gap ratio / contraction bound={}",
            num(worst_contraction)
        ));
    }
    if stride == 1 {
        let weighted = BoundInputs {
            risk_trace: Some(mean_risk[..iterations].to_vec()),
            reference_risk: Some(f_s),
            ..inputs
        };
        if let Ok((lhs, rhs)) = bounds::weighted_sum_bound(&weighted) {
            outcome
                .summary
                .push(format!("weighted gap sum={} bound={}", num(lhs), num(rhs)));
        }
    }
    Ok(outcome)
}

/// Measured inputs for `bounds`: `key = value` lines, lists comma-separated.
#[derive(Debug, Default)]
struct Measured {
    inputs: BoundInputs,
    /// `E ||w_t - w_t^(i)||^2` for `t = 2, 3, ...`
    l2_trace: Option<Vec<f64>>,
    /// Mean `F_S(w_t) - F_S(w)` for `t = 1, 2, ...`
    gap_trace: Option<Vec<f64>>,
}

fn parse_measured(text: &str, origin: &str) -> Result<Measured, CliError> {
    let mut m = Measured::default();
    for (key, value) in parse_pairs(text, origin)? {
        let bad = || CliError::Config(format!("{origin}: invalid value `{value}` for `{key}`"));
        let real = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<usize>().map_err(|_| bad());
        let list = || {
            value
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()
        };
        let inp = &mut m.inputs;
        match key.as_str() {
            "n" => inp.n = Some(int()?),
            "d" => inp.d = Some(int()?),
            "L" => inp.smoothness = Some(real()?),
            "L_coord" => inp.coord_smoothness = Some(real()?),
            "G" => inp.lipschitz = Some(real()?),
            "sigma" => inp.sigma = Some(real()?),
            "beta" => inp.beta = Some(real()?),
            "gamma" => inp.gamma = Some(real()?),
            "R" => inp.loss_bound = Some(real()?),
            "uniform_stability" => inp.uniform_stability = Some(real()?),
            "delta" => inp.delta = Some(real()?),
            "start_risk" => inp.start_risk = Some(real()?),
            "start_distance_sq" => inp.start_distance_sq = Some(real()?),
            "reference_risk" => inp.reference_risk = Some(real()?),
            "optimal_risk_proxy" => inp.optimal_risk_proxy = Some(real()?),
            "l1_stability" => inp.l1_stability = Some(real()?),
            "l2_stability" => inp.l2_stability = Some(real()?),
            "output_risk" => inp.output_risk = Some(real()?),
            "steps" => inp.steps = Some(list()?),
            "risk_trace" => inp.risk_trace = Some(list()?),
            "l2_trace" => m.l2_trace = Some(list()?),
            "gap_trace" => m.gap_trace = Some(list()?),
            other => {
                return Err(CliError::Config(format!(
                    "{origin}: unknown measured input `{other}`"
                )))
            }
        }
    }
    Ok(m)
}

/// Collects evaluated reports; evaluators lacking an input are listed, other failures abort.
#[derive(Default)]
struct ReportSet {
    reports: Vec<BoundReport>,
    skipped: Vec<String>,
}

impl ReportSet {
    fn add(&mut self, id: &str, result: pairwise_rcd::Result<BoundReport>) -> Result<(), CliError> {
        match result {
            Ok(r) => self.reports.push(r),
            Err(Error::MissingInput(name)) => self.skipped.push(format!("{id}: needs {name}")),
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    /// Vector-valued evaluator whose entry `k` refers to iterate `k + offset`.
    fn series(
        &mut self,
        id: &str,
        inp: &BoundInputs,
        offset: usize,
        eval: fn(&BoundInputs) -> pairwise_rcd::Result<Vec<f64>>,
        empirical: Option<&[f64]>,
    ) -> Result<(), CliError> {
        let result = eval(inp).map(|rhs| {
            let ts: Vec<usize> = (0..rhs.len()).map(|k| k + offset).collect();
            BoundReport::new(id, inp, &ts, &rhs, empirical)
        });
        self.add(id, result)
    }

    fn scalar(
        &mut self,
        id: &str,
        inp: &BoundInputs,
        t: usize,
        value: pairwise_rcd::Result<f64>,
    ) -> Result<(), CliError> {
        self.add(
            id,
            value.map(|v| BoundReport::new(id, inp, &[t], &[v], None)),
        )
    }
}

fn cmd_bounds(s: &Settings, out: &OutputDir) -> Result<Outcome, CliError> {
    let mut set = ReportSet::default();
    let mut notes = Vec::new();
    let (inputs, horizon) = match &s.measured {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let m = parse_measured(&text, &path.display().to_string())?;
            let horizon = m.inputs.steps.as_ref().map_or(1, |v| v.len() + 1);
            set.series(
                "stability-convex",
                &m.inputs,
                2,
                bounds::stability_bound_convex,
                m.l2_trace.as_deref(),
            )?;
            set.series(
                "stability-strongly-convex",
                &m.inputs,
                2,
                bounds::stability_bound_strongly_convex,
                m.l2_trace.as_deref(),
            )?;
            set.series(
                "optimization",
                &m.inputs,
                1,
                bounds::optimization_bound,
                m.gap_trace.as_deref(),
            )?;
            set.series(
                "excess-convex",
                &m.inputs,
                1,
                bounds::excess_bound_convex,
                None,
            )?;
            set.series(
                "excess-strongly-convex",
                &m.inputs,
                1,
                bounds::excess_bound_strongly_convex,
                None,
            )?;
            set.scalar(
                "high-probability",
                &m.inputs,
                horizon,
                bounds::high_probability_bound(&m.inputs),
            )?;
            (m.inputs, horizon)
        }
        None => {
            let data = Loaded::load(&s.data)?;
            let (source, n) = data.sample_source();
            let iterations = s.iterations(n);
            let mut cfg = OnAverageConfig {
                spec: s.spec(),
                optimizer: s.optimizer,
                schedule: Schedule::Constant(0.0),
                iterations,
                n,
                sample_indices: s.sample_indices.min(n),
                reps: s.reps,
                seed: s.seed,
                execution: s.execution,
            };
            let smoothness = on_average_smoothness(source, &cfg)?.filter(|l| *l > 0.0);
            let scale = if s.reg_lambda > 0.0 { s.beta } else { 0.5 };
            let eta = require_eta(s.eta.or(smoothness.map(|l| scale / l)), s.loss)?;
            cfg.schedule = s.step_rule.schedule(eta, iterations);
            let est = on_average_l2_stability(source, &cfg)?;
            notes.push(format!(
                "on-average estimate: n={n} T={iterations} eta={eta} reps={}",
                s.reps
            ));
            let inputs = BoundInputs {
                n: Some(n),
                d: Some(s.loss.param_dim(data.train.dim())),
                smoothness: est.smoothness,
                sigma: (s.reg_lambda > 0.0).then_some(s.reg_lambda),
                beta: Some(s.beta),
                steps: Some(cfg.schedule.steps(iterations)),
                risk_trace: Some(est.mean_risk.clone()),
                start_risk: Some(est.start_risk),
                l1_stability: Some(*est.l1.last().expect("recorded")),
                l2_stability: Some(est.final_l2()),
                output_risk: est.mean_risk.last().copied(),
                ..Default::default()
            };
            let l2_trace = &est.l2[1..];
            set.series(
                "stability-convex",
                &inputs,
                2,
                bounds::stability_bound_convex,
                Some(l2_trace),
            )?;
            if inputs.sigma.is_some() {
                set.series(
                    "stability-strongly-convex",
                    &inputs,
                    2,
                    bounds::stability_bound_strongly_convex,
                    Some(l2_trace),
                )?;
            }
            (inputs, iterations + 1)
        }
    };
    let gamma = match s.gamma.or(inputs.gamma) {
        Some(g) => Ok(g),
        None => bounds::optimal_gamma(&inputs),
    };
    let l2 = gamma.and_then(|g| bounds::estimation_bound_l2(&inputs, g));
    set.scalar("estimation-l2", &inputs, horizon, l2)?;
    set.scalar(
        "estimation-l1",
        &inputs,
        horizon,
        bounds::estimation_bound_l1(&inputs),
    )?;

    let mut rows = Vec::new();
    let mut text = Vec::new();
    for r in &set.reports {
        for row in &r.rows {
            let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
            rows.push(vec![
                r.bound_id.clone(),
                row.t.to_string(),
                num(row.rhs),
                cell(row.empirical),
                cell(row.ratio()),
            ]);
        }
        let status = match r.max_ratio() {
            Some(m) => format!(
                "max ratio {} ({})",
                num(m),
                if r.holds() { "holds" } else { "VIOLATED" }
            ),
            None => "rhs only".to_string(),
        };
        text.push(format!("{}: {} rows, {status}", r.bound_id, r.rows.len()));
        text.extend(r.warnings.iter().map(|w| format!("  warning: {w}")));
    }
    let (convex, strong) = (
        find(&set.reports, "stability-convex"),
        find(&set.reports, "stability-strongly-convex"),
    );
    if let (Some(c), Some(sc)) = (convex, strong) {
        let below = c.rows.iter().zip(&sc.rows).all(|(a, b)| b.rhs <= a.rhs);
        text.push(format!(
            "strongly convex stability bound <= convex bound at every t: {below}"
        ));
    }
    let mut outcome = Outcome::default();
    outcome
        .files
        .push(out.write_csv("bounds.csv", &BOUNDS_HEADER, &rows)?);
    let mut body = notes;
    body.push("inputs:".into());
    body.extend(
        inputs
            .describe()
            .into_iter()
            .map(|(k, v)| format!("  {k} = {v}")),
    );
    body.extend(text.iter().cloned());
    body.extend(set.skipped.iter().map(|s| format!("skipped {s}")));
    outcome
        .files
        .push(out.write_text("bounds.txt", &(body.join("\n") + "\n"))?);
    outcome.summary = text;
    Ok(outcome)
}

fn find<'a>(reports: &'a [BoundReport], id: &str) -> Option<&'a BoundReport> {
    reports.iter().find(|r| r.bound_id == id)
}

fn cmd_parse_check(s: &Settings, out: &OutputDir) -> Result<Outcome, CliError> {
    let DataSpec::File { path, dim, .. } = &s.data else {
        return Err(CliError::Config(
            "parse-check needs `data` set to a LIBSVM file".into(),
        ));
    };
    let ds = load_libsvm(path, *dim)?;
    let nnz: usize = ds.examples().iter().map(|e| e.features().len()).sum();
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for y in ds.labels() {
        *labels.entry(num(y)).or_default() += 1;
    }
    let back = parse_libsvm_str(&to_libsvm_string(&ds), ds.name())?;
    if back.examples() != ds.examples() {
        return Err(CliError::Check(format!(
            "{}: serialization round trip changed the data",
            path.display()
        )));
    }
    let mut lines = vec![
        format!("examples = {}", ds.len()),
        format!("features = {}", ds.dim()),
        format!("nonzeros = {nnz}"),
    ];
    lines.extend(labels.iter().map(|(y, c)| format!("label {y} = {c}")));
    lines.push("round trip = ok".into());
    let mut outcome = Outcome::default();
    outcome
        .files
        .push(out.write_text("parse_check.txt", &(lines.join("\n") + "\n"))?);
    outcome.summary = lines;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> Result<Settings, CliError> {
        let mut cfg = Config::default();
        for (k, v) in pairs {
            cfg.set(k, *v).unwrap();
        }
        Settings::from_config(&cfg)
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for bad in [
            ("loss", "nope"),
            ("etas", "0.1,-1"),
            ("reps", "0"),
            ("beta", "1"),
            ("execution", "gpu"),
            ("synth_features", "sparse:x"),
            ("pair_policy", "sampled"),
        ] {
            assert!(
                matches!(settings(&[bad]), Err(CliError::Config(_))),
                "{bad:?}"
            );
        }
        assert!(settings(&[]).is_ok());
    }

    #[test]
    fn iterations_default_to_passes_times_n() {
        let s = settings(&[("passes", "2.5")]).unwrap();
        assert_eq!(s.iterations(10), 25);
        let s = settings(&[("iterations", "7")]).unwrap();
        assert_eq!(s.iterations(10), 7);
    }

    #[test]
    fn measured_inputs_parse() {
        let m = parse_measured("n = 10\nsteps = 0.1, 0.2\nl2_trace = 0\n", "m").unwrap();
        assert_eq!(m.inputs.n, Some(10));
        assert_eq!(m.inputs.steps, Some(vec![0.1, 0.2]));
        assert_eq!(m.l2_trace, Some(vec![0.0]));
        assert!(parse_measured("bogus = 1", "m").is_err());
        assert!(parse_measured("n = x", "m").is_err());
    }
}
