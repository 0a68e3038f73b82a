//! Right-hand sides of the generalization, stability and optimization bounds
//! for randomized coordinate descent in pairwise learning.
//!
//! Every evaluator is a pure function of [`BoundInputs`] and reads only the
//! fields it needs; a missing field yields [`Error::MissingInput`]. Risk traces
//! are indexed from `w_1`, so `risk_trace[j - 1]` is the (seed-averaged) value
//! of `F_S(w_j)` and `steps[j - 1]` is `eta_j`.

mod checks;

pub use checks::{
    check_coercivity, check_self_bounding, CheckReport, DifferentiableFn, PairObjective,
};

use std::f64::consts::{E, SQRT_2};

use crate::error::{arg_err, Error, Result};

/// Measured and configured quantities that bound evaluators draw from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundInputs {
    pub n: Option<usize>,
    pub d: Option<usize>,
    /// Smoothness `L` of the loss (plus any regularizer).
    pub smoothness: Option<f64>,
    /// Coordinate-wise smoothness `L~`.
    pub coord_smoothness: Option<f64>,
    /// Gradient bound `G`.
    pub lipschitz: Option<f64>,
    /// Strong-convexity modulus.
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// Bound `R` on `|f|`.
    pub loss_bound: Option<f64>,
    /// Uniform-stability parameter, supplied by the user.
    pub uniform_stability: Option<f64>,
    pub delta: Option<f64>,
    /// `eta_1, eta_2, ...`
    pub steps: Option<Vec<f64>>,
    /// Seed-averaged `F_S(w_j)` for `j = 1, 2, ...`
    pub risk_trace: Option<Vec<f64>>,
    /// `F_S(w_1)`.
    pub start_risk: Option<f64>,
    /// `||w_1 - w||^2` for the comparison point `w`.
    pub start_distance_sq: Option<f64>,
    /// `F_S(w)` at the comparison point (for example `w_S`).
    pub reference_risk: Option<f64>,
    /// Proxy for the population optimum `F(w*)`.
    pub optimal_risk_proxy: Option<f64>,
    /// Mean `E ||A(S_i) - A(S)||` over `i`.
    pub l1_stability: Option<f64>,
    /// Mean `E ||A(S_i) - A(S)||^2` over `i`.
    pub l2_stability: Option<f64>,
    /// `E F_S(A(S))`.
    pub output_risk: Option<f64>,
}

fn need<T: Clone>(value: &Option<T>, name: &'static str) -> Result<T> {
    value.clone().ok_or(Error::MissingInput(name))
}

fn need_slice<'a>(value: &'a Option<Vec<f64>>, name: &'static str) -> Result<&'a [f64]> {
    value.as_deref().ok_or(Error::MissingInput(name))
}

fn positive(value: f64, name: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        arg_err(format!("{name} must be positive, got {value}"))
    }
}

impl BoundInputs {
    /// Present fields as `(name, value)` pairs, for echoing into reports.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut int = |name, v: Option<usize>| {
            if let Some(v) = v {
                out.push((name, v.to_string()));
            }
        };
        int("n", self.n);
        int("d", self.d);
        let reals = [
            ("L", self.smoothness),
            ("L_coord", self.coord_smoothness),
            ("G", self.lipschitz),
            ("sigma", self.sigma),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("R", self.loss_bound),
            ("uniform_stability", self.uniform_stability),
            ("delta", self.delta),
            ("start_risk", self.start_risk),
            ("start_distance_sq", self.start_distance_sq),
            ("reference_risk", self.reference_risk),
            ("optimal_risk_proxy", self.optimal_risk_proxy),
            ("l1_stability", self.l1_stability),
            ("l2_stability", self.l2_stability),
            ("output_risk", self.output_risk),
        ];
        out.extend(
            reals
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k, v.to_string()))),
        );
        if let Some(s) = &self.steps {
            out.push(("steps", format!("{} values", s.len())));
        }
        if let Some(r) = &self.risk_trace {
            out.push(("risk_trace", format!("{} values", r.len())));
        }
        out
    }

    /// Conditions on the step sizes that the optimization bounds assume but
    /// that are not enforced: nonincreasing, and `eta_t <= 1/L~`.
    pub fn step_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if let Some(steps) = &self.steps {
            if steps.windows(2).any(|w| w[1] > w[0]) {
                warnings.push("step sizes are not nonincreasing".to_string());
            }
            if let Some(lc) = self.coord_smoothness {
                let max = steps.iter().copied().fold(0.0, f64::max);
                if max * lc > 1.0 {
                    warnings.push(format!(
                        "largest step {max} exceeds 1/L_coord = {}",
                        1.0 / lc
                    ));
                }
            }
        }
        warnings
    }
}

/// One row of a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub rhs: f64,
    pub empirical: Option<f64>,
}

impl BoundRow {
    /// `empirical / rhs` when both are present.
    pub fn ratio(&self) -> Option<f64> {
        let emp = self.empirical?;
        Some(if self.rhs == 0.0 && emp == 0.0 {
            0.0
        } else {
            emp / self.rhs
        })
    }
}

/// A bound evaluated at one or more iteration counts, optionally joined with measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub bound_id: String,
    pub rows: Vec<BoundRow>,
    pub inputs: Vec<(&'static str, String)>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn new(
        bound_id: impl Into<String>,
        inputs: &BoundInputs,
        ts: &[usize],
        rhs: &[f64],
        empirical: Option<&[f64]>,
    ) -> Self {
        let rows = ts
            .iter()
            .zip(rhs)
            .enumerate()
            .map(|(k, (&t, &rhs))| BoundRow {
                t,
                rhs,
                empirical: empirical.and_then(|e| e.get(k).copied()),
            })
            .collect();
        BoundReport {
            bound_id: bound_id.into(),
            rows,
            inputs: inputs.describe(),
            warnings: inputs.step_warnings(),
        }
    }

    /// Largest `empirical / rhs` over rows that carry both.
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(BoundRow::ratio)
            .reduce(f64::max)
    }

    /// True when every row with an empirical value satisfies `empirical <= rhs`.
    pub fn holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.empirical.is_none_or(|e| e <= r.rhs))
    }
}

/// Estimation error bound from l1 on-average argument stability:
/// `(2G/n) sum_i E||A(S_i) - A(S)|| = 2G * l1_stability`.
pub fn estimation_bound_l1(inp: &BoundInputs) -> Result<f64> {
    let g = need(&inp.lipschitz, "G")?;
    let stab = need(&inp.l1_stability, "l1_stability")?;
    Ok(2.0 * g * stab)
}

/// Estimation error bound from l2 on-average argument stability:
/// `(L/gamma) E F_S(A(S)) + 2 (L + gamma) * l2_stability`.
pub fn estimation_bound_l2(inp: &BoundInputs, gamma: f64) -> Result<f64> {
    let gamma = positive(gamma, "gamma")?;
    let l = need(&inp.smoothness, "L")?;
    let risk = need(&inp.output_risk, "output_risk")?;
    let stab = need(&inp.l2_stability, "l2_stability")?;
    Ok(l / gamma * risk + 2.0 * (l + gamma) * stab)
}

/// The `gamma` minimizing [`estimation_bound_l2`]: `sqrt(L E F_S / (2 stab))`.
/// Infinite when the stability estimate is 0.
pub fn optimal_gamma(inp: &BoundInputs) -> Result<f64> {
    let l = need(&inp.smoothness, "L")?;
    let risk = need(&inp.output_risk, "output_risk")?;
    let stab = need(&inp.l2_stability, "l2_stability")?;
    Ok((l * risk / (2.0 * stab)).sqrt())
}

/// High-probability estimation bound for an `eps`-uniformly-stable algorithm:
/// `4 eps + e (12 sqrt2 R sqrt(log(e/delta)/(n-1)) + 48 sqrt6 eps ceil(log2(n-1)) log(e/delta))`.
pub fn high_probability_bound(inp: &BoundInputs) -> Result<f64> {
    let r = need(&inp.loss_bound, "R")?;
    let eps = need(&inp.uniform_stability, "uniform_stability")?;
    let delta = need(&inp.delta, "delta")?;
    let n = need(&inp.n, "n")?;
    if !(delta > 0.0 && delta < 1.0 / E) {
        return arg_err(format!("delta must lie in (0, 1/e), got {delta}"));
    }
    if n < 2 {
        return arg_err("high-probability bound needs n >= 2");
    }
    let m = (n - 1) as f64;
    let log_term = (E / delta).ln();
    let ceil_log2 = m.log2().ceil();
    Ok(4.0 * eps
        + E * (12.0 * SQRT_2 * r * (log_term / m).sqrt()
            + 48.0 * 6f64.sqrt() * eps * ceil_log2 * log_term))
}

/// Convex optimization error bound, one value per `t = 1..=steps.len()`:
/// `d (||w_1 - w||^2 + 2 eta_1 F_S(w_1)) / (2 sum_{j<=t} eta_j)`.
pub fn optimization_bound(inp: &BoundInputs) -> Result<Vec<f64>> {
    let d = need(&inp.d, "d")? as f64;
    let steps = need_slice(&inp.steps, "steps")?;
    let dist = need(&inp.start_distance_sq, "start_distance_sq")?;
    let f1 = need(&inp.start_risk, "start_risk")?;
    let numer = d * (dist + 2.0 * steps.first().copied().unwrap_or(0.0) * f1);
    let mut cum = 0.0;
    steps
        .iter()
        .map(|&eta| {
            cum += eta;
            if cum <= 0.0 {
                arg_err("step sizes sum to zero")
            } else {
                Ok(numer / (2.0 * cum))
            }
        })
        .collect()
}

/// Weighted-sum inequality for convex RCD, over the whole risk trace:
/// returns `(2 sum_j eta_j^2 (F_S(w_j) - F_S(w)), d eta_1 ||w_1 - w||^2 + 2 d eta_1^2 F_S(w_1))`.
pub fn weighted_sum_bound(inp: &BoundInputs) -> Result<(f64, f64)> {
    let d = need(&inp.d, "d")? as f64;
    let steps = need_slice(&inp.steps, "steps")?;
    let trace = need_slice(&inp.risk_trace, "risk_trace")?;
    let reference = need(&inp.reference_risk, "reference_risk")?;
    let dist = need(&inp.start_distance_sq, "start_distance_sq")?;
    let f1 = need(&inp.start_risk, "start_risk")?;
    if trace.len() > steps.len() {
        return arg_err("risk trace is longer than the step list");
    }
    let lhs = 2.0
        * trace
            .iter()
            .zip(steps)
            .map(|(f, eta)| eta * eta * (f - reference))
            .sum::<f64>();
    let eta1 = steps.first().copied().unwrap_or(0.0);
    Ok((lhs, d * eta1 * dist + 2.0 * d * eta1 * eta1 * f1))
}

/// Per-step contraction factors `1 - eta_t sigma / d` of the strongly convex rate.
pub fn contraction_factors(inp: &BoundInputs) -> Result<Vec<f64>> {
    let d = need(&inp.d, "d")? as f64;
    let sigma = positive(need(&inp.sigma, "sigma")?, "sigma")?;
    let steps = need_slice(&inp.steps, "steps")?;
    Ok(steps.iter().map(|eta| 1.0 - eta * sigma / d).collect())
}

fn stability_prefix(inp: &BoundInputs) -> Result<(f64, f64, Vec<f64>)> {
    let l = need(&inp.smoothness, "L")?;
    let n = need(&inp.n, "n")? as f64;
    let d = need(&inp.d, "d")? as f64;
    let steps = need_slice(&inp.steps, "steps")?;
    let trace = need_slice(&inp.risk_trace, "risk_trace")?;
    let len = steps.len().min(trace.len());
    let terms = (0..len).map(|j| steps[j] * steps[j] * trace[j]).collect();
    Ok((128.0 * l / (n * n * d), d, terms))
}

/// l2 on-average argument stability bound in the convex case.
///
/// Entry `t - 1` bounds the stability of `w_{t+1}`:
/// `(128 L / (n^2 d)) (t/d + 1) sum_{j<=t} eta_j^2 F_S(w_j)`.
pub fn stability_bound_convex(inp: &BoundInputs) -> Result<Vec<f64>> {
    let (c, d, terms) = stability_prefix(inp)?;
    let mut sum = 0.0;
    Ok(terms
        .iter()
        .enumerate()
        .map(|(j, a)| {
            sum += a;
            let t = (j + 1) as f64;
            c * (t / d * sum + sum)
        })
        .collect())
}

/// l2 on-average argument stability bound in the strongly convex case, with
/// `rho_k = 1 - 2 eta_k (1 - beta)(n - 2) sigma / (n d)`:
/// `(128 L/(n^2 d)) sum_{j<=t} [(t/d) prod_{k=j+1}^t rho_k^2 + prod_{k=j+1}^t rho_k] eta_j^2 F_S(w_j)`.
///
/// `sigma = 0` is accepted and reproduces [`stability_bound_convex`].
pub fn stability_bound_strongly_convex(inp: &BoundInputs) -> Result<Vec<f64>> {
    let (c, d, terms) = stability_prefix(inp)?;
    let n = need(&inp.n, "n")?;
    let sigma = need(&inp.sigma, "sigma")?;
    let beta = need(&inp.beta, "beta")?;
    if n < 3 {
        return arg_err("strongly convex stability bound needs n >= 3");
    }
    if !(beta > 0.0 && beta < 1.0) {
        return arg_err(format!("beta must lie in (0, 1), got {beta}"));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return arg_err(format!("sigma must be >= 0, got {sigma}"));
    }
    let n = n as f64;
    let steps = need_slice(&inp.steps, "steps")?;
    let scale = 2.0 * (1.0 - beta) * (n - 2.0) * sigma / (n * d);
    let (mut linear, mut squared) = (0.0, 0.0);
    let mut out = Vec::with_capacity(terms.len());
    for (j, a) in terms.iter().enumerate() {
        let t = (j + 1) as f64;
        // the factor for step j+1 multiplies all earlier terms
        let rho = 1.0 - steps[j] * scale;
        if !(0.0..=1.0).contains(&rho) {
            return arg_err(format!(
                "contraction factor {rho} at step {} is outside [0, 1]",
                j + 1
            ));
        }
        if j > 0 {
            linear *= rho;
            squared *= rho * rho;
        }
        linear += a;
        squared += a;
        out.push(c * (t / d * squared + linear));
    }
    Ok(out)
}

/// Explicit excess risk bound in the convex case, one value per `t = 1..steps.len()`
/// (entry `t - 1` bounds `F(w_{t+1}) - F(w*)`):
///
/// `[L/gamma + 256 L (L+gamma)/(n^2 d) (t/d + 1) sum_{j<=t} eta_j^2] F(w*)
///  + d (1 + L/gamma) / (2 sum_{j<=t+1} eta_j) (||w_1 - w*||^2 + 2 eta_1 F_S(w_1))
///  + 128 L (L+gamma)(t+d)/(n^2 d) (eta_1 ||w_1 - w*||^2 + 2 eta_1^2 F_S(w_1))`.
pub fn excess_bound_convex(inp: &BoundInputs) -> Result<Vec<f64>> {
    let l = need(&inp.smoothness, "L")?;
    let gamma = positive(need(&inp.gamma, "gamma")?, "gamma")?;
    let n = need(&inp.n, "n")? as f64;
    let d = need(&inp.d, "d")? as f64;
    let steps = need_slice(&inp.steps, "steps")?;
    let f_star = need(&inp.optimal_risk_proxy, "optimal_risk_proxy")?;
    let dist = need(&inp.start_distance_sq, "start_distance_sq")?;
    let f1 = need(&inp.start_risk, "start_risk")?;
    let eta1 = steps.first().copied().unwrap_or(0.0);
    let mut sum_sq = 0.0;
    let mut sum = eta1;
    let mut out = Vec::new();
    for t in 1..steps.len() {
        sum_sq += steps[t - 1] * steps[t - 1];
        sum += steps[t];
        if sum <= 0.0 {
            return arg_err("step sizes sum to zero");
        }
        let tf = t as f64;
        let risk_term =
            (l / gamma + 256.0 * l * (l + gamma) / (n * n * d) * (tf / d + 1.0) * sum_sq) * f_star;
        let opt_term = d * (1.0 + l / gamma) / (2.0 * sum) * (dist + 2.0 * eta1 * f1);
        let stab_term = 128.0 * l * (l + gamma) * (tf + d) / (n * n * d)
            * (eta1 * dist + 2.0 * eta1 * eta1 * f1);
        out.push(risk_term + opt_term + stab_term);
    }
    Ok(out)
}

/// Explicit excess risk bound in the strongly convex case, one value per
/// `t = 1..=steps.len()` (bounding `F(w_{t+1}) - F_S(w_S)`), with
/// `sigma' = (n-2) sigma / n` and `C_t = 64 L (d+t)(L+gamma) / (n^2 sigma'^2 (1-beta)^2)`:
///
/// `(1 + L/gamma)(1 - eta_t sigma/d)^t (F_S(w_1) - F_S(w_S)) + (L/gamma + C_t) F_S(w_S) + C_t (F_S(w_1) - F_S(w_S))`.
pub fn excess_bound_strongly_convex(inp: &BoundInputs) -> Result<Vec<f64>> {
    let l = need(&inp.smoothness, "L")?;
    let gamma = positive(need(&inp.gamma, "gamma")?, "gamma")?;
    let n = need(&inp.n, "n")?;
    let d = need(&inp.d, "d")? as f64;
    let sigma = positive(need(&inp.sigma, "sigma")?, "sigma")?;
    let beta = need(&inp.beta, "beta")?;
    let steps = need_slice(&inp.steps, "steps")?;
    let f1 = need(&inp.start_risk, "start_risk")?;
    let fs = need(&inp.reference_risk, "reference_risk")?;
    if n < 3 {
        return arg_err("strongly convex excess bound needs n >= 3");
    }
    if !(beta > 0.0 && beta < 1.0) {
        return arg_err(format!("beta must lie in (0, 1), got {beta}"));
    }
    let n = n as f64;
    let sigma_p = (n - 2.0) * sigma / n;
    let gap = f1 - fs;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(j, &eta)| {
            let t = (j + 1) as f64;
            let c = 64.0 * l * (d + t) * (l + gamma)
                / (n * n * sigma_p * sigma_p * (1.0 - beta).powi(2));
            (1.0 + l / gamma) * (1.0 - eta * sigma / d).powf(t) * gap
                + (l / gamma + c) * fs
                + c * gap
        })
        .collect())
}

/// Iteration count and `gamma` suggested by the rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub iterations: usize,
    pub gamma: f64,
}

fn round_iterations(x: f64) -> usize {
    if x.is_finite() {
        x.round().max(1.0) as usize
    } else {
        1
    }
}

/// Convex case, general noise: `T = sqrt(n) d / sqrt(L)`, `gamma = L T / d`.
pub fn recommend_convex(n: usize, d: usize, l: f64) -> Recommendation {
    let iterations = round_iterations((n as f64).sqrt() * d as f64 / l.sqrt());
    Recommendation {
        iterations,
        gamma: l * iterations as f64 / d as f64,
    }
}

/// Convex case under low noise: `T = n d / L`, `gamma = n d / T`.
pub fn recommend_low_noise(n: usize, d: usize, l: f64) -> Recommendation {
    let nd = n as f64 * d as f64;
    let iterations = round_iterations(nd / l);
    Recommendation {
        iterations,
        gamma: nd / iterations as f64,
    }
}

/// Strongly convex case: `T = (d / sigma) log(n sigma / L)`, `gamma = n sigma / sqrt(T)`.
pub fn recommend_strongly_convex(n: usize, d: usize, l: f64, sigma: f64) -> Recommendation {
    let iterations = round_iterations(d as f64 / sigma * (n as f64 * sigma / l).ln());
    Recommendation {
        iterations,
        gamma: n as f64 * sigma / (iterations as f64).sqrt(),
    }
}
