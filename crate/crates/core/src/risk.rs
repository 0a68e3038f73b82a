//! Pairwise empirical risk
//!
//! `F_S(w) = 1/(n(n-1)) * sum_{i != j} f(w; z_i, z_j) + (lambda/2) ||w||^2`
//!
//! together with its gradient, single partial derivatives, and a [`ScoreCache`]
//! that lets one coordinate step touch only the examples whose feature `k` is
//! non-zero.
//!
//! For the linear families every pair term depends on `w` only through the
//! scores `s_a = w . x_a`, so `d F_S / d w_k = norm * sum_a c_a x_ak + lambda w_k`
//! where `c_a` is the derivative of the pair sum with respect to `s_a`. A partial
//! derivative therefore needs `c_a` only on the support of column `k`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{arg_err, Error, Result};
use crate::loss::{quadratic_form, Family, PairwiseLoss};
use crate::rng::{stream, Purpose};

/// Largest `n` for which metric-learning pair scores are cached.
pub const METRIC_CACHE_LIMIT: usize = 500;

/// Which ordered pairs enter the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairPolicy {
    /// The full U-statistic over all `n(n-1)` ordered pairs.
    #[default]
    AllPairs,
    /// A fixed multiset of `pairs` ordered pairs drawn uniformly with `seed`.
    Sampled { pairs: usize, seed: u64 },
}

impl PairPolicy {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "all-pairs" => Ok(PairPolicy::AllPairs),
            s => {
                let rest = s.strip_prefix("sampled:");
                let parts: Vec<&str> = rest.map(|r| r.split(':').collect()).unwrap_or_default();
                match parts.as_slice() {
                    [m] => m
                        .parse()
                        .map(|pairs| PairPolicy::Sampled { pairs, seed: 0 })
                        .ok(),
                    [m, seed] => match (m.parse(), seed.parse()) {
                        (Ok(pairs), Ok(seed)) => Some(PairPolicy::Sampled { pairs, seed }),
                        _ => None,
                    },
                    _ => None,
                }
                .ok_or_else(|| {
                    Error::Argument(format!(
                        "bad pair policy `{s}` (all-pairs | sampled:M[:SEED])"
                    ))
                })
            }
        }
    }
}

impl std::fmt::Display for PairPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairPolicy::AllPairs => f.write_str("all-pairs"),
            PairPolicy::Sampled { pairs, seed } => write!(f, "sampled:{pairs}:{seed}"),
        }
    }
}

#[derive(Debug)]
struct MetricData {
    side: usize,
    /// Row-major `n x side` copy of the inputs.
    dense: Vec<f64>,
}

impl MetricData {
    fn row(&self, a: usize) -> &[f64] {
        &self.dense[a * self.side..(a + 1) * self.side]
    }

    fn diff(&self, a: usize, b: usize) -> Vec<(u32, f64)> {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .enumerate()
            .filter_map(|(i, (x, y))| {
                let v = x - y;
                (v != 0.0).then_some((i as u32, v))
            })
            .collect()
    }

    fn component(&self, a: usize, b: usize, i: usize) -> f64 {
        self.dense[a * self.side + i] - self.dense[b * self.side + i]
    }
}

/// Pairwise empirical risk on one dataset.
#[derive(Debug)]
pub struct RiskModel {
    loss: PairwiseLoss,
    data: Arc<Dataset>,
    reg_lambda: f64,
    policy: PairPolicy,
    param_dim: usize,
    /// `1 / n(n-1)` or `1 / pairs`.
    norm: f64,
    /// Column-major view of the inputs (linear families).
    columns: Vec<Vec<(u32, f64)>>,
    positives: Vec<u32>,
    negatives: Vec<u32>,
    labels: Vec<f64>,
    sampled: Vec<(u32, u32)>,
    metric: Option<MetricData>,
}

#[derive(Debug, Clone, PartialEq)]
enum CacheState {
    Scores(Vec<f64>),
    /// Quadratic forms, one per entry of the model's metric pair list.
    PairForms(Vec<f64>),
    Uncached,
}

/// Cached per-iterate quantities for coordinate steps.
///
/// The cache owns its copy of the iterate; [`RiskModel::coordinate_gradient`]
/// refuses to use it with a different `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCache {
    w: Vec<f64>,
    state: CacheState,
    version: u64,
    since_refresh: usize,
    refresh_every: usize,
}

impl ScoreCache {
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn into_w(self) -> Vec<f64> {
        self.w
    }

    /// Number of committed steps.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Cached linear scores, if this is a linear-family cache.
    pub fn scores(&self) -> Option<&[f64]> {
        match &self.state {
            CacheState::Scores(s) => Some(s),
            _ => None,
        }
    }
}

impl RiskModel {
    pub fn new(
        loss: PairwiseLoss,
        data: Arc<Dataset>,
        reg_lambda: f64,
        policy: PairPolicy,
    ) -> Result<Self> {
        let n = data.len();
        if n < 2 {
            return arg_err(format!("pairwise risk needs at least 2 examples, got {n}"));
        }
        if !(reg_lambda >= 0.0 && reg_lambda.is_finite()) {
            return arg_err(format!(
                "reg_lambda must be finite and >= 0, got {reg_lambda}"
            ));
        }
        let param_dim = loss.param_dim(data.dim());
        let labels: Vec<f64> = data.labels().collect();
        let (mut positives, mut negatives) = (Vec::new(), Vec::new());
        for (a, &y) in labels.iter().enumerate() {
            if y == 1.0 {
                positives.push(a as u32);
            } else if y == -1.0 {
                negatives.push(a as u32);
            }
        }
        let (norm, sampled) = match policy {
            PairPolicy::AllPairs => (1.0 / (n as f64 * (n as f64 - 1.0)), Vec::new()),
            PairPolicy::Sampled { pairs, seed } => {
                if pairs == 0 {
                    return arg_err("sampled pair policy needs at least one pair");
                }
                let mut rng = stream(seed, Purpose::PairSampling, 0);
                let list = (0..pairs)
                    .map(|_| {
                        let a = rng.random_range(0..n);
                        let mut b = rng.random_range(0..n - 1);
                        if b >= a {
                            b += 1;
                        }
                        (a as u32, b as u32)
                    })
                    .collect();
                (1.0 / pairs as f64, list)
            }
        };
        let mut columns = Vec::new();
        let mut metric = None;
        match loss.family {
            Family::Auc | Family::Ranking => {
                columns = vec![Vec::new(); param_dim];
                for (a, ex) in data.examples().iter().enumerate() {
                    for &(k, v) in ex.features() {
                        columns[k as usize].push((a as u32, v));
                    }
                }
            }
            Family::Metric => {
                let side = data.dim();
                let mut dense = vec![0.0; n * side];
                for (a, ex) in data.examples().iter().enumerate() {
                    for &(k, v) in ex.features() {
                        dense[a * side + k as usize] = v;
                    }
                }
                metric = Some(MetricData { side, dense });
            }
        }
        Ok(RiskModel {
            loss,
            data,
            reg_lambda,
            policy,
            param_dim,
            norm,
            columns,
            positives,
            negatives,
            labels,
            sampled,
            metric,
        })
    }

    pub fn loss(&self) -> PairwiseLoss {
        self.loss
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn reg_lambda(&self) -> f64 {
        self.reg_lambda
    }

    pub fn pair_policy(&self) -> PairPolicy {
        self.policy
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.param_dim {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim,
                got: w.len(),
            });
        }
        Ok(())
    }

    fn regularizer(&self, w: &[f64]) -> f64 {
        if self.reg_lambda == 0.0 {
            return 0.0;
        }
        0.5 * self.reg_lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    // ---- linear families -------------------------------------------------

    fn scores(&self, w: &[f64]) -> Vec<f64> {
        self.data.examples().iter().map(|e| e.dot(w)).collect()
    }

    /// Ordered pair term for the linear families.
    fn linear_term(&self, a: usize, b: usize, s: &[f64]) -> f64 {
        let sign = self.loss.pair_sign(self.labels[a], self.labels[b]);
        if self.loss.family == Family::Auc && sign == 0.0 {
            return 0.0;
        }
        self.loss.link.value(sign * (s[a] - s[b]))
    }

    fn linear_pair_sum(&self, s: &[f64]) -> f64 {
        let link = self.loss.link;
        if !self.sampled.is_empty() {
            return self
                .sampled
                .iter()
                .map(|&(a, b)| self.linear_term(a as usize, b as usize, s))
                .sum();
        }
        match self.loss.family {
            Family::Auc => {
                let mut total = 0.0;
                for &p in &self.positives {
                    let sp = s[p as usize];
                    for &q in &self.negatives {
                        total += link.value(sp - s[q as usize]);
                    }
                }
                total
            }
            _ => {
                // both orders of a pair carry the same value
                let n = self.n();
                let mut total = 0.0;
                for a in 0..n {
                    for b in (a + 1)..n {
                        total += self.linear_term(a, b, s);
                    }
                }
                2.0 * total
            }
        }
    }

    /// `d/ds_a` of the (unnormalized) pair sum, all-pairs policy.
    fn linear_coefficient(&self, a: usize, s: &[f64]) -> f64 {
        let link = self.loss.link;
        let sa = s[a];
        match self.loss.family {
            Family::Auc => {
                let y = self.labels[a];
                if y == 1.0 {
                    self.negatives
                        .iter()
                        .map(|&q| link.derivative(sa - s[q as usize]))
                        .sum()
                } else if y == -1.0 {
                    -self
                        .positives
                        .iter()
                        .map(|&p| link.derivative(s[p as usize] - sa))
                        .sum::<f64>()
                } else {
                    0.0
                }
            }
            _ => {
                let ya = self.labels[a];
                let mut c = 0.0;
                for (b, &yb) in self.labels.iter().enumerate() {
                    if b == a {
                        continue;
                    }
                    let sign = self.loss.pair_sign(ya, yb);
                    if sign != 0.0 {
                        c += sign * link.derivative(sign * (sa - s[b]));
                    }
                }
                2.0 * c
            }
        }
    }

    /// `d/ds_a` of the pair sum for every `a`.
    fn linear_coefficients(&self, s: &[f64]) -> Vec<f64> {
        if self.sampled.is_empty() {
            return (0..self.n())
                .map(|a| self.linear_coefficient(a, s))
                .collect();
        }
        let mut c = vec![0.0; self.n()];
        for &(a, b) in &self.sampled {
            let (a, b) = (a as usize, b as usize);
            let sign = self.loss.pair_sign(self.labels[a], self.labels[b]);
            if sign != 0.0 {
                let g = sign * self.loss.link.derivative(sign * (s[a] - s[b]));
                c[a] += g;
                c[b] -= g;
            }
        }
        c
    }

    fn linear_partial(&self, k: usize, w: &[f64], s: &[f64]) -> f64 {
        let col = &self.columns[k];
        let raw: f64 = if self.sampled.is_empty() {
            col.iter()
                .map(|&(a, x)| self.linear_coefficient(a as usize, s) * x)
                .sum()
        } else {
            let c = self.linear_coefficients(s);
            col.iter().map(|&(a, x)| c[a as usize] * x).sum()
        };
        self.norm * raw + self.reg_lambda * w[k]
    }

    // ---- metric family ---------------------------------------------------

    fn metric(&self) -> &MetricData {
        self.metric
            .as_ref()
            .expect("metric data present for metric family")
    }

    /// Calls `f(a, b, weight)` for each term of the metric pair sum.
    /// Under all-pairs both orders share a value so unordered pairs get weight 2.
    fn for_each_metric_pair(&self, mut f: impl FnMut(usize, usize, f64)) {
        if self.sampled.is_empty() {
            let n = self.n();
            for a in 0..n {
                for b in (a + 1)..n {
                    f(a, b, 2.0);
                }
            }
        } else {
            for &(a, b) in &self.sampled {
                f(a as usize, b as usize, 1.0);
            }
        }
    }

    fn metric_forms(&self, w: &[f64]) -> Vec<f64> {
        let md = self.metric();
        let mut forms = Vec::new();
        self.for_each_metric_pair(|a, b, _| forms.push(quadratic_form(w, md.side, &md.diff(a, b))));
        forms
    }

    fn metric_pair_sum(&self, forms: &[f64]) -> f64 {
        let link = self.loss.link;
        let mut total = 0.0;
        let mut idx = 0;
        self.for_each_metric_pair(|a, b, weight| {
            let tau = self.loss.pair_sign(self.labels[a], self.labels[b]);
            total += weight * link.value(tau * forms[idx]);
            idx += 1;
        });
        total
    }

    fn metric_partial(&self, k: usize, w: &[f64], forms: Option<&[f64]>) -> f64 {
        let md = self.metric();
        let (r, c) = (k / md.side, k % md.side);
        let link = self.loss.link;
        let mut raw = 0.0;
        let mut idx = 0;
        self.for_each_metric_pair(|a, b, weight| {
            let vr = md.component(a, b, r);
            let vc = md.component(a, b, c);
            if vr != 0.0 && vc != 0.0 {
                let q = match forms {
                    Some(f) => f[idx],
                    None => quadratic_form(w, md.side, &md.diff(a, b)),
                };
                let tau = self.loss.pair_sign(self.labels[a], self.labels[b]);
                raw += weight * tau * link.derivative(tau * q) * vr * vc;
            }
            idx += 1;
        });
        self.norm * raw + self.reg_lambda * w[k]
    }

    // ---- public surface --------------------------------------------------

    /// `F_S(w)`.
    pub fn empirical_risk(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        let pair_sum = match self.loss.family {
            Family::Auc | Family::Ranking => self.linear_pair_sum(&self.scores(w)),
            Family::Metric => self.metric_pair_sum(&self.metric_forms(w)),
        };
        Ok(self.norm * pair_sum + self.regularizer(w))
    }

    /// `grad F_S(w)`.
    pub fn full_gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        let mut grad = vec![0.0; self.param_dim];
        match self.loss.family {
            Family::Auc | Family::Ranking => {
                let s = self.scores(w);
                let c = self.linear_coefficients(&s);
                for (ex, &ca) in self.data.examples().iter().zip(&c) {
                    if ca != 0.0 {
                        for &(k, x) in ex.features() {
                            grad[k as usize] += ca * x;
                        }
                    }
                }
            }
            Family::Metric => {
                let md = self.metric();
                let link = self.loss.link;
                self.for_each_metric_pair(|a, b, weight| {
                    let v = md.diff(a, b);
                    let q = quadratic_form(w, md.side, &v);
                    let tau = self.loss.pair_sign(self.labels[a], self.labels[b]);
                    let coef = weight * tau * link.derivative(tau * q);
                    for &(r, vr) in &v {
                        for &(c, vc) in &v {
                            grad[r as usize * md.side + c as usize] += coef * vr * vc;
                        }
                    }
                });
            }
        }
        for (g, &wk) in grad.iter_mut().zip(w) {
            *g = self.norm * *g + self.reg_lambda * wk;
        }
        Ok(grad)
    }

    /// Fresh cache for the iterate `w`.
    pub fn new_cache(&self, w: &[f64]) -> Result<ScoreCache> {
        self.check_dim(w)?;
        Ok(ScoreCache {
            w: w.to_vec(),
            state: self.fresh_state(w),
            version: 0,
            since_refresh: 0,
            refresh_every: 10 * self.param_dim.max(1),
        })
    }

    fn fresh_state(&self, w: &[f64]) -> CacheState {
        match self.loss.family {
            Family::Auc | Family::Ranking => CacheState::Scores(self.scores(w)),
            Family::Metric => {
                if self.sampled.is_empty() && self.n() > METRIC_CACHE_LIMIT {
                    CacheState::Uncached
                } else {
                    CacheState::PairForms(self.metric_forms(w))
                }
            }
        }
    }

    /// `d F_S / d w_k` at `w`, from the cache. Fails if the cache holds a different iterate.
    pub fn coordinate_gradient(&self, w: &[f64], k: usize, cache: &ScoreCache) -> Result<f64> {
        self.check_dim(w)?;
        if k >= self.param_dim {
            return arg_err(format!(
                "coordinate {k} out of range for dimension {}",
                self.param_dim
            ));
        }
        if cache.w.len() != w.len()
            || cache
                .w
                .iter()
                .zip(w)
                .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Err(Error::StaleCache);
        }
        Ok(self.cached_partial(k, cache))
    }

    /// Partial derivative at the cache's own iterate.
    pub(crate) fn cached_partial(&self, k: usize, cache: &ScoreCache) -> f64 {
        match &cache.state {
            CacheState::Scores(s) => self.linear_partial(k, &cache.w, s),
            CacheState::PairForms(f) => self.metric_partial(k, &cache.w, Some(f)),
            CacheState::Uncached => self.metric_partial(k, &cache.w, None),
        }
    }

    /// Applies `w_k += delta`, updating cached scores in `O(nnz of column k)`
    /// (linear) or `O(pairs)` (metric). Every `10 * param_dim` commits the
    /// cache is rebuilt from scratch to shed accumulated rounding.
    pub fn commit_coordinate_step(&self, cache: &mut ScoreCache, k: usize, delta: f64) {
        cache.w[k] += delta;
        match &mut cache.state {
            CacheState::Scores(s) => {
                for &(a, x) in &self.columns[k] {
                    s[a as usize] += delta * x;
                }
            }
            CacheState::PairForms(forms) => {
                let md = self.metric();
                let (r, c) = (k / md.side, k % md.side);
                let mut idx = 0;
                self.for_each_metric_pair(|a, b, _| {
                    forms[idx] += delta * md.component(a, b, r) * md.component(a, b, c);
                    idx += 1;
                });
            }
            CacheState::Uncached => {}
        }
        cache.version += 1;
        cache.since_refresh += 1;
        if cache.since_refresh >= cache.refresh_every {
            self.refresh(cache);
        }
    }

    /// Recomputes cached quantities from the cache's iterate.
    pub fn refresh(&self, cache: &mut ScoreCache) {
        cache.state = self.fresh_state(&cache.w);
        cache.since_refresh = 0;
    }

    /// `F_S` at the cache's iterate using cached scores.
    pub fn risk_from_cache(&self, cache: &ScoreCache) -> f64 {
        let pair_sum = match &cache.state {
            CacheState::Scores(s) => self.linear_pair_sum(s),
            CacheState::PairForms(f) => self.metric_pair_sum(f),
            CacheState::Uncached => self.metric_pair_sum(&self.metric_forms(&cache.w)),
        };
        self.norm * pair_sum + self.regularizer(&cache.w)
    }

    /// Gradient of the per-pair objective `f(w; z_a, z_b) + (lambda/2)||w||^2`.
    pub fn pair_gradient(&self, w: &[f64], a: usize, b: usize) -> Result<Vec<f64>> {
        let ex = self.data.examples();
        let mut g = self.loss.gradient(w, &ex[a], &ex[b])?;
        if self.reg_lambda != 0.0 {
            for (gk, &wk) in g.iter_mut().zip(w) {
                *gk += self.reg_lambda * wk;
            }
        }
        Ok(g)
    }

    /// Smoothness of `F_S`: the per-pair `L` from the data plus `lambda`. `None` for hinge links.
    pub fn smoothness(&self, seed: u64) -> Option<f64> {
        self.loss
            .constants(&self.data, seed)
            .smoothness
            .map(|l| l + self.reg_lambda)
    }

    /// Certified coordinate-wise smoothness of `F_S`:
    /// `sup|phi''| * max_k norm * sum_{active pairs} (x_ak - x_bk)^2 + lambda`.
    /// `None` for hinge links.
    pub fn coordinate_smoothness(&self) -> Option<f64> {
        let curvature = self.loss.link.curvature_bound()?;
        let sums = self.coordinate_pair_sums();
        let max = sums.into_iter().fold(0.0, f64::max);
        Some(curvature * self.norm * max + self.reg_lambda)
    }

    /// Per coordinate: sum over active ordered pairs of the squared derivative of the pair score.
    fn coordinate_pair_sums(&self) -> Vec<f64> {
        let ex = self.data.examples();
        let mut out = vec![0.0; self.param_dim];
        if !self.sampled.is_empty() || self.loss.family == Family::Metric {
            let mut add_pair = |a: usize, b: usize, weight: f64| {
                if !self.loss.pair_is_active(self.labels[a], self.labels[b]) {
                    return;
                }
                let v = ex[a].difference(&ex[b]);
                match self.loss.family {
                    Family::Metric => {
                        let side = self.data.dim();
                        for &(r, vr) in &v {
                            for &(c, vc) in &v {
                                out[r as usize * side + c as usize] += weight * (vr * vc).powi(2);
                            }
                        }
                    }
                    _ => {
                        for &(k, vk) in &v {
                            out[k as usize] += weight * vk * vk;
                        }
                    }
                }
            };
            if self.sampled.is_empty() {
                for a in 0..self.n() {
                    for b in (a + 1)..self.n() {
                        add_pair(a, b, 2.0);
                    }
                }
            } else {
                for &(a, b) in &self.sampled {
                    add_pair(a as usize, b as usize, 1.0);
                }
            }
            return out;
        }
        match self.loss.family {
            Family::Auc => {
                let (np, nn) = (self.positives.len() as f64, self.negatives.len() as f64);
                for (k, col) in self.columns.iter().enumerate() {
                    let (mut sp, mut sp2, mut sn, mut sn2) = (0.0, 0.0, 0.0, 0.0);
                    for &(a, x) in col {
                        match self.labels[a as usize] {
                            1.0 => {
                                sp += x;
                                sp2 += x * x;
                            }
                            -1.0 => {
                                sn += x;
                                sn2 += x * x;
                            }
                            _ => {}
                        }
                    }
                    out[k] = nn * sp2 + np * sn2 - 2.0 * sp * sn;
                }
            }
            _ => {
                // all ordered pairs minus those inside an equal-label group
                let n = self.n() as f64;
                let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
                for &y in &self.labels {
                    let next = groups.len();
                    groups.entry(y.to_bits()).or_insert(next);
                }
                let mut group_size = vec![0.0; groups.len()];
                for &y in &self.labels {
                    group_size[groups[&y.to_bits()]] += 1.0;
                }
                for (k, col) in self.columns.iter().enumerate() {
                    let (mut s1, mut s2) = (0.0, 0.0);
                    let mut g1 = vec![0.0; groups.len()];
                    let mut g2 = vec![0.0; groups.len()];
                    for &(a, x) in col {
                        s1 += x;
                        s2 += x * x;
                        let g = groups[&self.labels[a as usize].to_bits()];
                        g1[g] += x;
                        g2[g] += x * x;
                    }
                    let mut active = 2.0 * (n * s2 - s1 * s1);
                    for g in 0..group_size.len() {
                        active -= 2.0 * (group_size[g] * g2[g] - g1[g] * g1[g]);
                    }
                    out[k] = active.max(0.0);
                }
            }
        }
        out
    }
}
