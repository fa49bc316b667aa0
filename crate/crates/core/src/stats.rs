//! Closed-form laws behind the detector.
//!
//! Under a homogeneous binomial point process of `n` points with intensity
//! `lambda`, the volume `V(k)` of the first search step holding `k` points has
//!
//! ```text
//! P(V(k) > v) = sum_{j<k} C(n, j) p^j (1 - p)^(n - j),   p = lambda v / n
//! ```
//!
//! which tends to `Gamma(k, lambda)` as `n` grows. The ratio of two independent
//! such volumes is `Beta(k1, k2)`, and the neighbor-searching discrepancy is
//! that Beta CDF at one half:
//!
//! ```text
//! NSD(k1, k2) = P(V1(k1) < V2(k2)) = I_{1/2}(k1, k2)
//! ```
//!
//! Everything is evaluated in log space; `k1` can reach the window size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `k1 + k2` accepted by [`nsd_exact`].
pub const EXACT_SUM_BOUND: u64 = 10_000;

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Parameters of the neighbor-searching volume law `V(k, n, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeLawParams {
    pub k: u64,
    pub n: u64,
    pub lambda: f64,
}

impl VolumeLawParams {
    pub fn new(k: u64, n: u64, lambda: f64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::Domain(format!("need 1 <= k <= n, got k={k}, n={n}")));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Domain(format!("intensity must be positive, got {lambda}")));
        }
        Ok(Self { k, n, lambda })
    }

    /// Success probability `lambda v / n` of one point landing in volume `v`.
    fn cell_probability(&self, v: f64) -> f64 {
        self.lambda * v / self.n as f64
    }
}

/// Arguments of `NSD(k1, k2)`; both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NsdParams {
    pub k1: u64,
    pub k2: u64,
}

impl NsdParams {
    pub fn new(k1: u64, k2: u64) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::NsdParamNonPositive { k1, k2 });
        }
        Ok(Self { k1, k2 })
    }
}

/// ln Gamma(x) for x > 0 (Lanczos, g = 7, nine terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// ln C(n, j).
fn ln_choose(n: u64, j: u64) -> f64 {
    debug_assert!(j <= n);
    let m = j.min(n - j);
    if m < 32 {
        // Short product: exact up to rounding, avoids cancellation of two huge lnGammas.
        (0..m).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0)
    }
}

fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// ln of the binomial pmf `C(n, j) p^j (1 - p)^(n - j)`, with `0^0 = 1`.
fn ln_binomial_pmf(n: u64, j: u64, p: f64) -> f64 {
    let succ = if j == 0 { 0.0 } else { j as f64 * p.ln() };
    let fail = if j == n { 0.0 } else { (n - j) as f64 * (-p).ln_1p() };
    ln_choose(n, j) + succ + fail
}

fn check_volume(p: &VolumeLawParams, v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Domain(format!("volume must be finite and nonnegative, got {v}")));
    }
    let cell = p.cell_probability(v);
    if cell > 1.0 {
        return Err(Error::Domain(format!(
            "lambda*v/n = {cell} exceeds 1: volume beyond the support n/lambda"
        )));
    }
    Ok(cell)
}

/// `P(V(k) > v)` under the binomial point process.
pub fn volume_ccdf(p: &VolumeLawParams, v: f64) -> Result<f64> {
    let cell = check_volume(p, v)?;
    if cell == 0.0 {
        return Ok(1.0);
    }
    let ln_tail = log_sum_exp((0..p.k).map(|j| ln_binomial_pmf(p.n, j, cell)));
    Ok(ln_tail.exp().clamp(0.0, 1.0))
}

/// `P(V(k) <= v)`.
pub fn volume_cdf(p: &VolumeLawParams, v: f64) -> Result<f64> {
    volume_ccdf(p, v).map(|c| 1.0 - c)
}

/// Density of `V(k)`: `binom(k; n, lambda v / n) * k / v` on `0 < lambda v / n < 1`.
pub fn volume_pdf(p: &VolumeLawParams, v: f64) -> Result<f64> {
    let cell = check_volume(p, v)?;
    if !(cell > 0.0 && cell < 1.0) {
        return Err(Error::Domain(format!("density needs 0 < lambda*v/n < 1, got {cell}")));
    }
    Ok((ln_binomial_pmf(p.n, p.k, cell) + (p.k as f64).ln() - v.ln()).exp())
}

/// Gamma(k, lambda) density (shape `k`, rate `lambda`), the large-`n` limit of [`volume_pdf`].
///
/// Zero for `v < 0`; at `v = 0` it is `lambda` for `k = 1` and zero otherwise.
pub fn gamma_pdf(k: u64, lambda: f64, v: f64) -> f64 {
    assert!(k >= 1, "gamma shape must be positive");
    assert!(lambda > 0.0, "gamma rate must be positive");
    if v < 0.0 {
        return 0.0;
    }
    if v == 0.0 {
        return if k == 1 { lambda } else { 0.0 };
    }
    let k_f = k as f64;
    (-lambda * v + k_f * lambda.ln() + (k_f - 1.0) * v.ln() - ln_gamma(k_f)).exp()
}

/// `P(V(k) <= v)` under a homogeneous Poisson process:
/// `1 - sum_{j<k} exp(-lambda v) (lambda v)^j / j!`.
pub fn poisson_kth_neighbor_cdf(k: u64, lambda: f64, v: f64) -> f64 {
    assert!(k >= 1, "neighbor rank must be positive");
    assert!(lambda > 0.0, "intensity must be positive");
    assert!(v >= 0.0, "volume must be nonnegative");
    let x = lambda * v;
    if x == 0.0 {
        return 0.0;
    }
    let ln_x = x.ln();
    let ln_term = |j: u64| -x + j as f64 * ln_x - ln_gamma(j as f64 + 1.0);
    if x < k as f64 {
        // Upper Poisson tail sum_{j>=k}; terms decay geometrically past the mode.
        let mut ln_terms = Vec::new();
        let mut j = k;
        loop {
            let t = ln_term(j);
            ln_terms.push(t);
            if t < ln_terms[0] - 40.0 || j > k + 100_000 {
                break;
            }
            j += 1;
        }
        log_sum_exp(ln_terms).exp().clamp(0.0, 1.0)
    } else {
        let lower = log_sum_exp((0..k).map(ln_term)).exp();
        (1.0 - lower).clamp(0.0, 1.0)
    }
}

/// Two-dimensional form: the kth neighbor lies within distance `t`.
pub fn poisson_kth_neighbor_cdf_2d(k: u64, lambda: f64, t: f64) -> f64 {
    poisson_kth_neighbor_cdf(k, lambda, std::f64::consts::PI * t * t)
}

/// Continued fraction for `I_x(a, b)` (modified Lentz), accurate when
/// `x <= (a + 1) / (a + b + 2)`.
fn betainc_cf(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;

        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return front * h;
        }
    }
    // Unreachable for integer shapes below ~10^8; the iteration count grows like sqrt(max(a, b)).
    front * h
}

/// Neighbor-searching discrepancy `NSD(k1, k2) = I_{1/2}(k1, k2)`: the probability
/// that the `k1`th-neighbor volume of one sample is smaller than the
/// `k2`th-neighbor volume of an independent sample.
///
/// The continued fraction is run on whichever of `(k1, k2)`, `(k2, k1)` has
/// its value at or below one half, so small tails keep full relative precision.
pub fn nsd(k1: u64, k2: u64) -> Result<f64> {
    let p = NsdParams::new(k1, k2)?;
    let (a, b) = (p.k1 as f64, p.k2 as f64);
    if p.k1 >= p.k2 {
        Ok(betainc_cf(a, b, 0.5))
    } else {
        Ok(1.0 - betainc_cf(b, a, 0.5))
    }
}

/// `NSD(k1, k2)` from the binomial-tail identity
/// `I_{1/2}(a, b) = 2^-(a+b-1) sum_{j=a}^{a+b-1} C(a+b-1, j)`,
/// with log-factorials accumulated term by term.
pub fn nsd_exact(k1: u64, k2: u64) -> Result<f64> {
    let p = NsdParams::new(k1, k2)?;
    let sum = p.k1 + p.k2;
    if sum > EXACT_SUM_BOUND {
        return Err(Error::OverflowGuard { sum, bound: EXACT_SUM_BOUND });
    }
    let n = (sum - 1) as usize;
    let mut ln_fact = Vec::with_capacity(n + 1);
    ln_fact.push(0.0f64);
    for i in 1..=n {
        ln_fact.push(ln_fact[i - 1] + (i as f64).ln());
    }
    let ln_half_pow = n as f64 * std::f64::consts::LN_2;
    let terms = (p.k1 as usize..=n).map(|j| ln_fact[n] - ln_fact[j] - ln_fact[n - j] - ln_half_pow);
    Ok(log_sum_exp(terms).exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..25u32 {
            assert_abs_diff_eq!(ln_gamma(n as f64), fact.ln(), epsilon = 1e-12);
            fact *= n as f64;
        }
        assert_abs_diff_eq!(ln_gamma(0.5), 0.5 * std::f64::consts::PI.ln(), epsilon = 1e-14);
    }

    #[test]
    fn ln_choose_branches_agree() {
        for &(n, j) in &[(100u64, 31u64), (100, 32), (1000, 40), (70, 35)] {
            let lg = ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0);
            let prod: f64 = (0..j).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum();
            assert_abs_diff_eq!(ln_choose(n, j), prod, epsilon = 1e-10);
            assert_abs_diff_eq!(lg, prod, epsilon = 1e-10);
        }
    }

    #[test]
    fn ccdf_k1_is_a_single_term() {
        let p = VolumeLawParams::new(1, 40, 2.5).unwrap();
        let v = 3.0;
        let cell = 2.5 * v / 40.0;
        assert_abs_diff_eq!(volume_ccdf(&p, v).unwrap(), (1.0 - cell).powi(40), epsilon = 1e-14);
        assert_eq!(volume_ccdf(&p, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn ccdf_edges_and_domain() {
        let p = VolumeLawParams::new(3, 10, 1.0).unwrap();
        assert_eq!(volume_ccdf(&p, 10.0).unwrap(), 0.0);
        assert!(matches!(volume_ccdf(&p, 10.5), Err(Error::Domain(_))));
        assert!(matches!(volume_ccdf(&p, -1.0), Err(Error::Domain(_))));
        assert!(matches!(volume_pdf(&p, 10.0), Err(Error::Domain(_))));
        assert!(matches!(volume_pdf(&p, 0.0), Err(Error::Domain(_))));
        assert!(VolumeLawParams::new(0, 10, 1.0).is_err());
        assert!(VolumeLawParams::new(11, 10, 1.0).is_err());
        assert!(VolumeLawParams::new(1, 10, 0.0).is_err());
    }

    #[test]
    fn pdf_k1_closed_form() {
        let (n, lambda, v) = (50u64, 2.0, 4.0);
        let p = VolumeLawParams::new(1, n, lambda).unwrap();
        let expected = n as f64 * (lambda / n as f64) * (1.0 - lambda * v / n as f64).powi(n as i32 - 1);
        assert_abs_diff_eq!(volume_pdf(&p, v).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn gamma_pdf_examples() {
        assert_eq!(gamma_pdf(1, 1.0, 0.0), 1.0);
        assert_abs_diff_eq!(gamma_pdf(1, 1.0, 1e-12), 1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(gamma_pdf(2, 1.0, 1.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(gamma_pdf(3, 1.0, -1.0), 0.0);
        assert_eq!(gamma_pdf(3, 1.0, 0.0), 0.0);
    }

    #[test]
    fn poisson_cdf_examples() {
        assert_eq!(poisson_kth_neighbor_cdf(4, 2.0, 0.0), 0.0);
        assert_abs_diff_eq!(poisson_kth_neighbor_cdf(1, 1.0, std::f64::consts::LN_2), 0.5, epsilon = 1e-15);
        // Both branches around x = k.
        let below = poisson_kth_neighbor_cdf(5, 1.0, 4.999_999);
        let above = poisson_kth_neighbor_cdf(5, 1.0, 5.000_001);
        assert!(below < above && (above - below) < 1e-6);
        assert_abs_diff_eq!(
            poisson_kth_neighbor_cdf_2d(1, 1.0, 1.0),
            1.0 - (-std::f64::consts::PI).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn nsd_reported_values() {
        for &(k1, k2, want) in
            &[(10, 14, 0.798), (10, 10, 0.5), (10, 6, 0.151), (20, 15, 0.196), (20, 20, 0.5), (20, 25, 0.774)]
        {
            assert_abs_diff_eq!(nsd(k1, k2).unwrap(), want, epsilon = 5e-4);
        }
        assert_abs_diff_eq!(nsd(1, 2).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(nsd(14, 10).unwrap(), 1.0 - 0.797_563_552_856_445_3, epsilon = 1e-12);
    }

    #[test]
    fn nsd_is_not_symmetric_in_the_difference() {
        let up = nsd(10, 14).unwrap();
        let down = 1.0 - nsd(10, 6).unwrap();
        assert!((up - down).abs() > 0.04, "{up} vs {down}");
    }

    #[test]
    fn nsd_exact_small_cases() {
        assert_eq!(nsd_exact(1, 1).unwrap(), 0.5);
        assert_abs_diff_eq!(nsd_exact(10, 1).unwrap(), 0.5f64.powi(10), epsilon = 1e-16);
        assert_abs_diff_eq!(nsd_exact(20, 6).unwrap(), 0.002_038_657_665_252_685_5, epsilon = 1e-15);
    }

    #[test]
    fn nsd_errors() {
        assert_eq!(nsd(0, 5), Err(Error::NsdParamNonPositive { k1: 0, k2: 5 }));
        assert_eq!(nsd_exact(3, 0), Err(Error::NsdParamNonPositive { k1: 3, k2: 0 }));
        assert_eq!(nsd_exact(5000, 5001), Err(Error::OverflowGuard { sum: 10_001, bound: 10_000 }));
        assert!(nsd_exact(5000, 5000).is_ok());
    }

    #[test]
    fn nsd_tiny_tail_keeps_relative_precision() {
        let v = nsd(200, 1).unwrap();
        let want = 0.5f64.powi(200);
        assert!(((v - want) / want).abs() < 1e-9, "{v:e} vs {want:e}");
    }

    #[test]
    fn nsd_large_window_values() {
        // K1 of the order of a window size.
        for &(a, b) in &[(4000u64, 4100u64), (4999, 5001), (3000, 2900)] {
            let cf = nsd(a, b).unwrap();
            let exact = nsd_exact(a, b).unwrap();
            assert_abs_diff_eq!(cf, exact, epsilon = 1e-9);
        }
    }
}
