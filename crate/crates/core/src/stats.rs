//! Small descriptive statistics used by the simulation harnesses.

use alloc::vec::Vec;

use crate::math;
use crate::numeric::compensated_sum;

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance (`n − 1` denominator); zero for a single value.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
}

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * math::erfc(-x / core::f64::consts::SQRT_2)
}

/// Binomial standard error `sqrt(p(1 − p)/n)`.
pub fn binomial_stderr(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    math::sqrt((p * (1.0 - p)).max(0.0) / n as f64)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Order statistic at 1-based index `⌈q·n⌉` (clamped to `[1, n]`).
pub fn upper_order_statistic(values: &[f64], q: f64) -> f64 {
    let v = sorted(values);
    order_statistic_sorted(&v, q)
}

pub(crate) fn order_statistic_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    // Guard against 0.95·20 = 19.000000000000004 style rounding.
    let raw = q * n as f64;
    let idx = math::ceil(raw - 1e-9 * math::abs(raw).max(1.0)) as usize;
    sorted[idx.clamp(1, n) - 1]
}

/// `sup_x |F_n(x) − F(x)|` for a sample against a continuous cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let v = sorted(values);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// `sup_x (F_n(x) − F(x))`: how far the sample cdf rises above `cdf`.
///
/// Small values mean the sample is not stochastically smaller than `cdf`.
pub fn ks_one_sided_excess<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let v = sorted(values);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - cdf(*x));
    }
    d
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(math::abs(i as f64 / na - j as f64 / nb));
    }
    d
}

/// Empirical quantiles at probabilities `probs`, using the upper order statistic.
pub fn quantiles(values: &[f64], probs: &[f64]) -> Vec<f64> {
    let v = sorted(values);
    probs.iter().map(|&p| order_statistic_sorted(&v, p)).collect()
}

/// Standard normal quantile by bisection on the cdf.
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return if p <= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(variance(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(variance(&[5.0]), 0.0);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
    }

    #[test]
    fn order_statistic_convention() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(upper_order_statistic(&v, 0.95), 19.0);
        assert_eq!(upper_order_statistic(&v, 0.951), 20.0);
        assert_eq!(upper_order_statistic(&v, 0.0), 1.0);
        assert_eq!(upper_order_statistic(&v, 1.0), 20.0);
    }

    #[test]
    fn ks_distances() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
        let uniform: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_one_sample(&uniform, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
        assert!(ks_one_sided_excess(&uniform, |x| x.clamp(0.0, 1.0)) <= 0.005 + 1e-12);
    }
}
