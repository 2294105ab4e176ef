//! Model comparison: likelihood-ratio tests, the dependence ratio, and the
//! comparison of transition and stand-by exponents.

pub mod chi2;
pub mod ks;
pub mod lrt;
pub mod ratio;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use chi2::{chi2_cdf, chi2_isf, chi2_ln_sf, chi2_pvalue, chi2_sf, PValue};
pub use ks::{ks_one_sample, ks_two_sample, KsResult};
pub use lrt::{lrt_all_users, lrt_global, lrt_per_user, LrtResult, UserLrt};
pub use ratio::{dependence_ratio, ratio_report, user_dependence_ratio, DependenceRatio, RatioReport};

use crate::error::{Error, Result};
use crate::estimate::{FitResult, Model, UserParams, UserSample};
use crate::model::Threshold;
use crate::scalar::Scalar;

/// Median of the finite values; mean of the two middle order statistics for
/// even counts.
pub fn median<T: Scalar>(xs: &[T]) -> Option<T> {
    let mut v: Vec<T> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / T::of(2.0) })
}

/// Empirical CDF as `(value, F(value))` steps.
pub fn ecdf<T: Scalar>(xs: &[T]) -> Vec<(T, T)> {
    let mut v: Vec<T> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = T::of_usize(v.len());
    v.iter().enumerate().map(|(i, &x)| (x, T::of_usize(i + 1) / n)).collect()
}

/// Summary of one exponent population across users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct ExponentPopulation<T> {
    pub n: usize,
    pub undefined: usize,
    pub median: Option<T>,
    /// |median − 1|, distance to the γ ≈ 1 universality class.
    pub distance_class_1: Option<T>,
    /// |median − 3/2|, distance to the γ ≈ 3/2 universality class.
    pub distance_class_3_2: Option<T>,
    #[serde(skip)]
    pub values: Vec<T>,
}

impl<T: Scalar> ExponentPopulation<T> {
    fn from_values(all: Vec<Option<T>>) -> Self {
        let values: Vec<T> = all.iter().flatten().copied().collect();
        let median = median(&values);
        ExponentPopulation {
            n: values.len(),
            undefined: all.len() - values.len(),
            median,
            distance_class_1: median.map(|m| (m - T::one()).abs()),
            distance_class_3_2: median.map(|m| (m - T::of(1.5)).abs()),
            values,
        }
    }

    pub fn ecdf(&self) -> Vec<(T, T)> {
        ecdf(&self.values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary<T> {
    /// γ_S, long times after a short one.
    pub transition: ExponentPopulation<T>,
    /// γ_L, long times after a long one.
    pub standby: ExponentPopulation<T>,
}

pub fn exponent_summary<T: Scalar>(fit: &FitResult<T>) -> Result<ExponentSummary<T>> {
    if fit.model != Model::Mk {
        return Err(Error::Comparison(format!("exponent summary needs an MK fit, got {}", fit.model)));
    }
    let (mut gs, mut gl) = (Vec::new(), Vec::new());
    for u in fit.users.values() {
        if let UserParams::Mk { gamma_s, gamma_l, .. } = u.params {
            gs.push(gamma_s);
            gl.push(gamma_l);
        }
    }
    Ok(ExponentSummary {
        transition: ExponentPopulation::from_values(gs),
        standby: ExponentPopulation::from_values(gl),
    })
}

/// KS comparison of the γ_S and γ_L populations of an MK fit.
pub fn exponent_ks<T: Scalar>(summary: &ExponentSummary<T>) -> Result<KsResult<T>> {
    let mut r = ks_two_sample(&summary.transition.values, &summary.standby.values)?;
    r.excluded += summary.transition.undefined + summary.standby.undefined;
    Ok(r)
}

/// Per-user test outcomes for one comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerUserTests<T> {
    pub users: BTreeMap<String, UserLrt<T>>,
    pub tested: usize,
    pub rejected: usize,
    /// Share of tested users rejecting the simpler model at `alpha`.
    pub reject_share: Option<T>,
}

impl<T: Scalar> PerUserTests<T> {
    fn new(users: BTreeMap<String, UserLrt<T>>, alpha: T) -> Self {
        let ps: Vec<T> = users.values().filter_map(|u| u.p_value.map(|p| p.value)).collect();
        let rejected = ps.iter().filter(|&&p| p < alpha).count();
        PerUserTests {
            tested: ps.len(),
            rejected,
            reject_share: (!ps.is_empty()).then(|| T::of_usize(rejected) / T::of_usize(ps.len())),
            users,
        }
    }

    pub fn p_values(&self) -> Vec<T> {
        self.users.values().filter_map(|u| u.p_value.map(|p| p.value)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison<T> {
    pub global: LrtResult<T>,
    pub per_user: PerUserTests<T>,
}

pub fn compare<T: Scalar>(low: &FitResult<T>, high: &FitResult<T>, alpha: T) -> Result<Comparison<T>> {
    let global = lrt_global(low, high, alpha)?;
    let per_user = PerUserTests::new(lrt_all_users(low, high)?, alpha);
    Ok(Comparison { global, per_user })
}

/// Everything reported by a test run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport<T> {
    pub alpha: T,
    pub n_users: usize,
    pub n_pairs_total: usize,
    pub t_thres_it: Option<T>,
    pub t_thres_mk: Option<T>,
    /// IP versus IT: value of the short/long cut.
    pub cut: Option<Comparison<T>>,
    /// IT versus MK at the MK threshold: value of one-step memory.
    pub mem: Option<Comparison<T>>,
    pub exponents: Option<ExponentSummary<T>>,
    pub exponent_ks: Option<KsResult<T>>,
    pub ratios: Vec<RatioReport<T>>,
}

/// Inputs for a [`TestReport`]. `it_at_mk` is the IT model refitted at the
/// MK threshold, which keeps the memory test nested.
pub struct TestInputs<'a, T> {
    pub ip: Option<&'a FitResult<T>>,
    pub it: Option<&'a FitResult<T>>,
    pub it_at_mk: Option<&'a FitResult<T>>,
    pub mk: Option<&'a FitResult<T>>,
    pub users: &'a [UserSample<T>],
    pub ratio_thresholds: &'a [Threshold<T>],
    pub alpha: T,
}

impl<T: Scalar> TestReport<T> {
    pub fn assemble(inp: TestInputs<'_, T>) -> Result<Self> {
        let any = [inp.ip, inp.it, inp.it_at_mk, inp.mk]
            .into_iter()
            .flatten()
            .next()
            .ok_or_else(|| Error::NoData("no fits to test".into()))?;
        let cut = match (inp.ip, inp.it) {
            (Some(ip), Some(it)) => Some(compare(ip, it, inp.alpha)?),
            _ => None,
        };
        let mem = match (inp.it_at_mk, inp.mk) {
            (Some(it), Some(mk)) => Some(compare(it, mk, inp.alpha)?),
            _ => None,
        };
        let exponents = inp.mk.map(exponent_summary).transpose()?;
        let exponent_ks = match &exponents {
            Some(s) if s.transition.n > 0 && s.standby.n > 0 => Some(exponent_ks(s)?),
            _ => None,
        };
        let mut thresholds: Vec<Threshold<T>> = inp.mk.and_then(|f| f.threshold()).into_iter().collect();
        for &t in inp.ratio_thresholds {
            if !thresholds.contains(&t) {
                thresholds.push(t);
            }
        }
        let ratios = thresholds.iter().map(|&t| ratio_report(inp.users, t)).collect();
        Ok(TestReport {
            alpha: inp.alpha,
            n_users: any.n_users,
            n_pairs_total: any.n_pairs_total,
            t_thres_it: inp.it.and_then(|f| f.t_thres),
            t_thres_mk: inp.mk.and_then(|f| f.t_thres),
            cut,
            mem,
            exponents,
            exponent_ks,
            ratios,
        })
    }
}
