//! Straight-from-the-formula bound evaluators, written independently of the library.

pub fn reference_high_probability(r: f64, eps: f64, delta: f64, n: usize) -> f64 {
    let e = std::f64::consts::E;
    let log_term = (e / delta).ln();
    let first = 12.0 * 2f64.sqrt() * r * (log_term / (n as f64 - 1.0)).sqrt();
    let second = 48.0 * 6f64.sqrt() * eps * ((n - 1) as f64).log2().ceil() * log_term;
    4.0 * eps + e * (first + second)
}

pub fn reference_convex(l: f64, n: usize, d: usize, steps: &[f64], risks: &[f64], t: usize) -> f64 {
    let (n, d) = (n as f64, d as f64);
    let mut sum = 0.0;
    for j in 1..=t {
        sum += steps[j - 1].powi(2) * risks[j - 1];
    }
    128.0 * l / (n.powi(2) * d) * (t as f64 / d + 1.0) * sum
}

#[allow(clippy::too_many_arguments)]
pub fn reference_strong(
    l: f64,
    n: usize,
    d: usize,
    sigma: f64,
    beta: f64,
    steps: &[f64],
    risks: &[f64],
    t: usize,
) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    let rho = |k: usize| 1.0 - 2.0 * steps[k - 1] * (1.0 - beta) * (nf - 2.0) * sigma / (nf * df);
    let mut total = 0.0;
    for j in 1..=t {
        let mut prod = 1.0;
        for k in (j + 1)..=t {
            prod *= rho(k);
        }
        total += (t as f64 / df * prod * prod + prod) * steps[j - 1].powi(2) * risks[j - 1];
    }
    128.0 * l / (nf * nf * df) * total
}
