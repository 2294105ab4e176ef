//! Kolmogorov–Smirnov tests with asymptotic p-values.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult<T> {
    pub statistic: T,
    pub p_value: T,
    pub n_x: usize,
    pub n_y: usize,
    /// Non-finite inputs dropped before testing.
    pub excluded: usize,
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf<T: Scalar>(lambda: T) -> T {
    if !(lambda > T::zero()) {
        return T::one();
    }
    let eps = T::epsilon();
    if lambda < T::of(1.18) {
        // P(K ≤ λ) = √(2π)/λ · Σ exp(−(2k−1)²π²/(8λ²))
        let w = -(T::PI() * T::PI()) / (T::of(8.0) * lambda * lambda);
        let mut sum = T::zero();
        for k in 1..=50 {
            let m = T::of_usize(2 * k - 1);
            let term = (w * m * m).exp();
            sum = sum + term;
            if term <= eps * sum {
                break;
            }
        }
        let cdf = T::TAU().sqrt() / lambda * sum;
        (T::one() - cdf).max(T::zero()).min(T::one())
    } else {
        // P(K > λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²)
        let w = -T::of(2.0) * lambda * lambda;
        let mut sum = T::zero();
        for k in 1..=100 {
            let kk = T::of_usize(k * k);
            let term = (w * kk).exp();
            sum = if k % 2 == 1 { sum + term } else { sum - term };
            if term <= eps * sum.abs() {
                break;
            }
        }
        (T::of(2.0) * sum).max(T::zero()).min(T::one())
    }
}

/// p-value for a KS distance at effective sample size `n_eff`, with the
/// Stephens small-sample correction `(√n + 0.12 + 0.11/√n)·D`.
pub fn ks_pvalue<T: Scalar>(statistic: T, n_eff: T) -> T {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + T::of(0.12) + T::of(0.11) / sn) * statistic)
}

fn finite_sorted<T: Scalar>(xs: &[T]) -> (Vec<T>, usize) {
    let mut v: Vec<T> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    let dropped = xs.len() - v.len();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    (v, dropped)
}

/// `sup |F_x − F_y|` over two sorted samples, handling ties.
fn two_sample_distance<T: Scalar>(x: &[T], y: &[T]) -> T {
    let (nx, ny) = (T::of_usize(x.len()), T::of_usize(y.len()));
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < x.len() && j < y.len() {
        let v = match x[i].partial_cmp(&y[j]).expect("finite") {
            Ordering::Greater => y[j],
            _ => x[i],
        };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        let gap = (T::of_usize(i) / nx - T::of_usize(j) / ny).abs();
        d = d.max(gap);
    }
    d
}

/// Two-sample KS test. Non-finite values (undefined exponents) are dropped
/// and counted.
pub fn ks_two_sample<T: Scalar>(xs: &[T], ys: &[T]) -> Result<KsResult<T>> {
    let (x, dx) = finite_sorted(xs);
    let (y, dy) = finite_sorted(ys);
    if x.is_empty() || y.is_empty() {
        return Err(Error::NoData("KS test needs two nonempty samples".into()));
    }
    let statistic = two_sample_distance(&x, &y);
    let (nx, ny) = (T::of_usize(x.len()), T::of_usize(y.len()));
    let p_value = ks_pvalue(statistic, nx * ny / (nx + ny));
    Ok(KsResult { statistic, p_value, n_x: x.len(), n_y: y.len(), excluded: dx + dy })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<T: Scalar>(xs: &[T], cdf: impl Fn(T) -> T) -> Result<KsResult<T>> {
    let (x, dx) = finite_sorted(xs);
    if x.is_empty() {
        return Err(Error::NoData("KS test needs a nonempty sample".into()));
    }
    let n = T::of_usize(x.len());
    let mut d = T::zero();
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        let above = T::of_usize(i + 1) / n - f;
        let below = f - T::of_usize(i) / n;
        d = d.max(above).max(below);
    }
    Ok(KsResult { statistic: d, p_value: ks_pvalue(d, n), n_x: x.len(), n_y: 0, excluded: dx })
}
