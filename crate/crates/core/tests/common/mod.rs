//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite 20-point Gauss-Legendre over `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            let mid = lo + h / 2.0;
            rule.iter().map(|&(x, w)| w * f(mid + x * h / 2.0)).sum::<f64>() * h / 2.0
        })
        .sum()
}

/// `ln(j!)` by direct summation.
pub fn ln_factorial(j: u64) -> f64 {
    (2..=j).map(|i| (i as f64).ln()).sum()
}

/// `sum_{j<k} e^{-x} x^j / j!` term by term.
pub fn poisson_lower_sum(k: u64, x: f64) -> f64 {
    (0..k).map(|j| (-x + j as f64 * x.ln() - ln_factorial(j)).exp()).sum()
}

/// Gamma(k, rate) density written out directly.
pub fn gamma_density(k: u64, rate: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    (-rate * v + k as f64 * rate.ln() + (k - 1) as f64 * v.ln() - ln_factorial(k - 1)).exp()
}

/// Sorts all points by (distance, index) and keeps the first `k`.
pub fn sort_oracle(query: &[f64], rows: &[Vec<f64>], k: usize, excluded: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let mut all: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.truncate(k);
    (all.iter().map(|p| p.1).collect(), all.iter().map(|p| p.0).collect())
}

/// Double loop with a seen-flag per target.
pub fn union_oracle(origins: &[Vec<f64>], radii: &[f64], targets: &[Vec<f64>]) -> usize {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut seen = vec![false; targets.len()];
    for (o, &r) in origins.iter().zip(radii) {
        for (t, s) in targets.iter().zip(seen.iter_mut()) {
            if dist(o, t) < r {
                *s = true;
            }
        }
    }
    seen.iter().filter(|&&s| s).count()
}
