//! Likelihood-ratio tests between nested fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::chi2::{chi2_isf, chi2_pvalue, PValue};
use crate::error::{Error, Result};
use crate::estimate::{FitResult, Model};
use crate::model::LogLik;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtResult<T> {
    pub low: Model,
    pub high: Model,
    /// `2·(ℓ_high − ℓ_low)`; absent when either likelihood is degenerate.
    pub statistic: Option<T>,
    pub dof: usize,
    pub p_value: Option<PValue<T>>,
    pub alpha: T,
    pub critical_value: T,
    pub reject: Option<bool>,
    pub degenerate: bool,
    /// Set when a nondegenerate statistic came out negative, which the
    /// nesting of the models forbids.
    pub nesting_violated: bool,
}

fn check_comparable<T: Scalar>(low: &FitResult<T>, high: &FitResult<T>) -> Result<()> {
    let nested = matches!(
        (low.model, high.model),
        (Model::Ip, Model::It) | (Model::It, Model::Mk) | (Model::Ip, Model::Mk)
    );
    if !nested {
        return Err(Error::Comparison(format!("{} is not nested in {}", low.model, high.model)));
    }
    if low.n_pairs_total != high.n_pairs_total || low.n_users != high.n_users {
        return Err(Error::Comparison(format!(
            "fits cover different samples ({} pairs / {} users vs {} pairs / {} users)",
            low.n_pairs_total, low.n_users, high.n_pairs_total, high.n_users
        )));
    }
    if low.users.keys().ne(high.users.keys()) {
        return Err(Error::Comparison("fits cover different users".into()));
    }
    if let (Some(a), Some(b)) = (&low.source_digest, &high.source_digest) {
        if a != b {
            return Err(Error::Comparison("fits were computed from different inputs".into()));
        }
    }
    if low.model != Model::Ip && low.t_thres != high.t_thres {
        return Err(Error::Comparison(format!(
            "{} and {} fits use different thresholds ({:?} vs {:?})",
            low.model, high.model, low.t_thres, high.t_thres
        )));
    }
    Ok(())
}

fn statistic<T: Scalar>(low: LogLik<T>, high: LogLik<T>) -> Option<T> {
    match (low, high) {
        (LogLik::Finite(l), LogLik::Finite(h)) => Some(T::of(2.0) * (h - l)),
        _ => None,
    }
}

fn pvalue<T: Scalar>(d: T, dof: usize) -> Result<PValue<T>> {
    if d <= T::zero() {
        return Ok(PValue::one());
    }
    chi2_pvalue(d, T::of_usize(dof))
}

pub fn lrt_global<T: Scalar>(low: &FitResult<T>, high: &FitResult<T>, alpha: T) -> Result<LrtResult<T>> {
    check_comparable(low, high)?;
    let dof = high.dof - low.dof;
    let critical_value = chi2_isf(alpha, T::of_usize(dof))?;
    let statistic = statistic(low.loglik_total, high.loglik_total);
    let p_value = statistic.map(|d| pvalue(d, dof)).transpose()?;
    Ok(LrtResult {
        low: low.model,
        high: high.model,
        statistic,
        dof,
        p_value,
        alpha,
        critical_value,
        reject: statistic.map(|d| d > critical_value),
        degenerate: statistic.is_none(),
        nesting_violated: statistic.is_some_and(|d| d < T::zero()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserLrt<T> {
    pub statistic: Option<T>,
    pub dof: usize,
    pub p_value: Option<PValue<T>>,
    /// Either fit flagged this user, or a likelihood is degenerate.
    pub degenerate: bool,
}

/// Per-user test. The shared threshold is held fixed, so the degrees of
/// freedom are the per-user parameter difference only.
pub fn lrt_per_user<T: Scalar>(low: &FitResult<T>, high: &FitResult<T>, user: &str) -> Result<UserLrt<T>> {
    let (Some(l), Some(h)) = (low.users.get(user), high.users.get(user)) else {
        return Err(Error::Comparison(format!("user {user:?} missing from one of the fits")));
    };
    let dof = high.model.params_per_user() - low.model.params_per_user();
    let statistic = statistic(l.loglik, h.loglik);
    let degenerate = l.degenerate || h.degenerate || statistic.is_none();
    let p_value = if degenerate { None } else { statistic.map(|d| pvalue(d, dof)).transpose()? };
    Ok(UserLrt { statistic, dof, p_value, degenerate })
}

pub fn lrt_all_users<T: Scalar>(low: &FitResult<T>, high: &FitResult<T>) -> Result<BTreeMap<String, UserLrt<T>>> {
    check_comparable(low, high)?;
    low.users
        .keys()
        .map(|u| Ok((u.clone(), lrt_per_user(low, high, u)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{fit_at_threshold, UserSample};
    use crate::model::Threshold;

    fn users() -> Vec<UserSample<f64>> {
        vec![
            UserSample::new("a", vec![vec![5.0, 70.0, 12.0, 30.0, 900.0, 61.0, 2.0, 4000.0, 3.0, 8.0]]),
            UserSample::new("b", vec![vec![80.0, 3.0, 150.0, 9.0, 65.0, 4.0, 300.0, 7.0, 1.0, 700.0]]),
        ]
    }

    #[test]
    fn identical_fits_give_zero() {
        let t = Some(Threshold::new(60.0).unwrap());
        let it = fit_at_threshold(&users(), Model::It, t).unwrap();
        let mut fake_mk = it.clone();
        fake_mk.model = Model::Mk;
        fake_mk.dof = Model::Mk.dof(2);
        let r = lrt_global(&it, &fake_mk, 0.05).unwrap();
        assert_eq!(r.statistic, Some(0.0));
        assert_eq!(r.p_value.unwrap().value, 1.0);
        assert_eq!(r.dof, 4);
        let u = lrt_per_user(&it, &fake_mk, "a").unwrap();
        assert_eq!(u.p_value.unwrap().value, 1.0);
        assert_eq!(u.dof, 2);
    }

    #[test]
    fn dof_for_each_comparison() {
        let us = users();
        let t = Some(Threshold::new(60.0).unwrap());
        let ip = fit_at_threshold(&us, Model::Ip, None).unwrap();
        let it = fit_at_threshold(&us, Model::It, t).unwrap();
        let mk = fit_at_threshold(&us, Model::Mk, t).unwrap();
        assert_eq!(lrt_global(&ip, &it, 0.05).unwrap().dof, 3);
        let mem = lrt_global(&it, &mk, 0.05).unwrap();
        assert_eq!(mem.dof, 4);
        assert!(mem.statistic.unwrap() >= 0.0);
        assert_eq!(lrt_per_user(&ip, &it, "b").unwrap().dof, 1);
    }

    #[test]
    fn mismatches_are_rejected() {
        let us = users();
        let t = Some(Threshold::new(60.0).unwrap());
        let it = fit_at_threshold(&us, Model::It, t).unwrap();
        let mk = fit_at_threshold(&us[..1], Model::Mk, t).unwrap();
        assert!(matches!(lrt_global(&it, &mk, 0.05), Err(Error::Comparison(_))));
        let mk30 = fit_at_threshold(&us, Model::Mk, Some(Threshold::new(30.0).unwrap())).unwrap();
        assert!(matches!(lrt_global(&it, &mk30, 0.05), Err(Error::Comparison(_))));
        assert!(matches!(lrt_global(&mk30, &it, 0.05), Err(Error::Comparison(_))));
        let mut a = it.clone();
        let mut b = fit_at_threshold(&us, Model::Mk, t).unwrap();
        a.source_digest = Some("x".into());
        b.source_digest = Some("y".into());
        assert!(matches!(lrt_global(&a, &b, 0.05), Err(Error::Comparison(_))));
    }

    #[test]
    fn degenerate_likelihood_is_reported() {
        let t = Some(Threshold::new(60.0).unwrap());
        let it = fit_at_threshold(&users(), Model::It, t).unwrap();
        let mut mk = fit_at_threshold(&users(), Model::Mk, t).unwrap();
        mk.loglik_total = LogLik::Degenerate;
        let r = lrt_global(&it, &mk, 0.05).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, None);
    }
}
