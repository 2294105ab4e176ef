//! Maximum-likelihood estimation for the IP, IT and MK models.
//!
//! Given a threshold every per-user MLE is closed form: probabilities are
//! transition frequencies and exponents follow the continuous power-law
//! estimator `γ = 1 + m / Σ ln(t_i / t_min)`. The shared threshold is the
//! argmax of the summed likelihood over a finite grid.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, LogLik, StateLabel, SuccessorSample, Threshold};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ip,
    It,
    Mk,
}

impl Model {
    /// Free parameters per user (the shared threshold excluded).
    pub fn params_per_user(self) -> usize {
        match self {
            Model::Ip => 1,
            Model::It => 2,
            Model::Mk => 4,
        }
    }

    /// Degrees of freedom for `n` users: n, 2n + 1, 4n + 1.
    pub fn dof(self, n_users: usize) -> usize {
        match self {
            Model::Ip => n_users,
            Model::It | Model::Mk => self.params_per_user() * n_users + 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Ip => "ip",
            Model::It => "it",
            Model::Mk => "mk",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ip" => Ok(Model::Ip),
            "it" => Ok(Model::It),
            "mk" => Ok(Model::Mk),
            other => Err(Error::Config(format!("unknown model {other:?} (expected ip, it or mk)"))),
        }
    }
}

/// All waiting-time blocks of one user. Times are in seconds; each inner
/// vector is one day block.
#[derive(Clone, Debug, PartialEq)]
pub struct UserSample<T> {
    pub user_id: String,
    pub blocks: Vec<Vec<T>>,
}

impl<T: Scalar> UserSample<T> {
    pub fn new(user_id: impl Into<String>, blocks: Vec<Vec<T>>) -> Self {
        UserSample { user_id: user_id.into(), blocks }
    }

    /// Number of waiting times that have a predecessor in their block.
    pub fn n_pairs(&self) -> usize {
        self.blocks.iter().map(|b| b.len().saturating_sub(1)).sum()
    }

    /// `(previous, current)` waiting-time pairs, never straddling blocks.
    pub fn pairs(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.blocks.iter().flat_map(|b| b.windows(2).map(|w| (w[0], w[1])))
    }

    pub fn successor_samples(&self, t: Threshold<T>) -> Vec<SuccessorSample<T>> {
        self.pairs()
            .map(|(prev, time)| SuccessorSample { prev: t.label(prev), time })
            .collect()
    }

    /// Every successor time, for the IP model which ignores labels.
    pub fn successor_times(&self) -> impl Iterator<Item = T> + '_ {
        self.pairs().map(|(_, time)| time)
    }
}

/// Result of the closed-form exponent estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent<T> {
    Value(T),
    /// No tail points.
    NoData,
    /// Every tail point sits on the lower bound.
    Undefined,
}

impl<T: Scalar> Exponent<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Exponent::Value(g) => Some(g),
            _ => None,
        }
    }
}

pub fn fit_exponent<T: Scalar>(tail: &[T], lower_bound: T) -> Result<Exponent<T>> {
    if tail.is_empty() {
        return Ok(Exponent::NoData);
    }
    let ln_lb = lower_bound.ln();
    let mut sum = T::zero();
    for &x in tail {
        if !(x >= lower_bound) || !x.is_finite() {
            return Err(Error::Domain(format!(
                "tail point {x} below lower bound {lower_bound}"
            )));
        }
        sum = sum + (x.ln() - ln_lb);
    }
    if sum <= T::zero() {
        return Ok(Exponent::Undefined);
    }
    Ok(Exponent::Value(T::one() + T::of_usize(tail.len()) / sum))
}

/// An observed frequency `hits / trials`, kept as counts so it stays exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Frequency {
    pub hits: u64,
    pub trials: u64,
}

impl Frequency {
    pub fn record(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += u64::from(hit);
    }

    pub fn as_ratio(self) -> Option<Ratio<u64>> {
        (self.trials > 0).then(|| Ratio::new(self.hits, self.trials))
    }

    pub fn value<T: Scalar>(self) -> Option<T> {
        (self.trials > 0).then(|| T::of(self.hits as f64) / T::of(self.trials as f64))
    }
}

/// Empirical frequencies of short times overall and after each state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct TransitionFrequencies {
    pub short_after_short: Frequency,
    pub short_after_long: Frequency,
    pub short: Frequency,
}

pub fn fit_probabilities<T: Scalar>(
    samples: &[SuccessorSample<T>],
    t: Threshold<T>,
) -> TransitionFrequencies {
    let mut f = TransitionFrequencies::default();
    for s in samples {
        let short = t.label(s.time).is_short();
        f.short.record(short);
        match s.prev {
            StateLabel::Short => f.short_after_short.record(short),
            StateLabel::Long => f.short_after_long.record(short),
        }
    }
    f
}

/// Fitted per-user parameters. `None` marks a parameter that cannot be
/// estimated from this user's data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum UserParams<T> {
    Ip {
        gamma: Option<T>,
    },
    It {
        p_s: T,
        gamma: Option<T>,
    },
    Mk {
        p_s: T,
        p_s_given_s: Option<T>,
        p_s_given_l: Option<T>,
        gamma_s: Option<T>,
        gamma_l: Option<T>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserFit<T> {
    pub params: UserParams<T>,
    pub loglik: LogLik<T>,
    pub n_pairs: usize,
    pub degenerate: bool,
}

pub fn fit_user<T: Scalar>(user: &UserSample<T>, t: Option<Threshold<T>>, model: Model) -> Result<UserFit<T>> {
    let n_pairs = user.n_pairs();
    if n_pairs == 0 {
        return Err(Error::NoData(format!("user {} has no consecutive waiting times", user.user_id)));
    }
    match model {
        Model::Ip => fit_user_ip(user, n_pairs),
        Model::It | Model::Mk => {
            let t = t.ok_or_else(|| Error::Config(format!("model {model} needs a threshold")))?;
            let samples = user.successor_samples(t);
            if model == Model::It {
                fit_user_it(&samples, t, n_pairs)
            } else {
                fit_user_mk(&samples, t, n_pairs)
            }
        }
    }
}

fn fit_user_ip<T: Scalar>(user: &UserSample<T>, n_pairs: usize) -> Result<UserFit<T>> {
    let times: Vec<T> = user.successor_times().collect();
    let gamma = fit_exponent(&times, T::one())?.value();
    let samples: Vec<_> = times
        .iter()
        .map(|&time| SuccessorSample { prev: StateLabel::Long, time })
        .collect();
    let loglik = match gamma {
        Some(g) => model::loglik_ip(&samples, &model::IpParams { gamma: g })?,
        // With every time at 1 s there is no finite maximizer.
        None => LogLik::zero(),
    };
    Ok(UserFit { params: UserParams::Ip { gamma }, loglik, n_pairs, degenerate: gamma.is_none() })
}

fn long_times<T: Scalar>(samples: &[SuccessorSample<T>], t: Threshold<T>, after: Option<StateLabel>) -> Vec<T> {
    samples
        .iter()
        .filter(|s| s.time >= t.seconds() && after.is_none_or(|a| s.prev == a))
        .map(|s| s.time)
        .collect()
}

fn fit_user_it<T: Scalar>(samples: &[SuccessorSample<T>], t: Threshold<T>, n_pairs: usize) -> Result<UserFit<T>> {
    let freqs = fit_probabilities(samples, t);
    let p_s: T = freqs.short.value().expect("n_pairs > 0");
    let gamma = fit_exponent(&long_times(samples, t, None), t.seconds())?.value();
    let loglik = match gamma {
        Some(g) => model::loglik_it(samples, &model::ItParams { p_s, gamma: g }, t)?,
        None => model::mixture_loglik(samples, |_| p_s, |_| None, t)?,
    };
    Ok(UserFit { params: UserParams::It { p_s, gamma }, loglik, n_pairs, degenerate: gamma.is_none() })
}

fn fit_user_mk<T: Scalar>(samples: &[SuccessorSample<T>], t: Threshold<T>, n_pairs: usize) -> Result<UserFit<T>> {
    let freqs = fit_probabilities(samples, t);
    let p_s: T = freqs.short.value().expect("n_pairs > 0");
    let p_ss: Option<T> = freqs.short_after_short.value();
    let p_sl: Option<T> = freqs.short_after_long.value();
    let gamma_s = fit_exponent(&long_times(samples, t, Some(StateLabel::Short)), t.seconds())?.value();
    let gamma_l = fit_exponent(&long_times(samples, t, Some(StateLabel::Long)), t.seconds())?.value();

    let degenerate = p_ss.is_none() || p_sl.is_none() || gamma_s.is_none() || gamma_l.is_none();
    let loglik = match (p_ss, p_sl, gamma_s, gamma_l) {
        (Some(p_s_given_s), Some(p_s_given_l), Some(gamma_s), Some(gamma_l)) => {
            let p = model::MkParams { p_s_given_s, p_s_given_l, gamma_s, gamma_l };
            model::loglik_mk(samples, &p, t)?
        }
        // An undefined conditional has no samples behind it, so the
        // placeholder value is never read.
        _ => model::mixture_loglik(
            samples,
            |prev| match prev {
                StateLabel::Short => p_ss.unwrap_or(T::zero()),
                StateLabel::Long => p_sl.unwrap_or(T::zero()),
            },
            |prev| match prev {
                StateLabel::Short => gamma_s,
                StateLabel::Long => gamma_l,
            },
            t,
        )?,
    };
    Ok(UserFit {
        params: UserParams::Mk { p_s, p_s_given_s: p_ss, p_s_given_l: p_sl, gamma_s, gamma_l },
        loglik,
        n_pairs,
        degenerate,
    })
}

/// A fitted model over a population of users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub model: Model,
    /// Shared threshold; absent for IP.
    pub t_thres: Option<T>,
    pub loglik_total: LogLik<T>,
    pub dof: usize,
    pub n_users: usize,
    pub n_pairs_total: usize,
    pub degenerate_users: Vec<String>,
    pub users: BTreeMap<String, UserFit<T>>,
    /// Digest of the sequence data the fit was computed from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_digest: Option<String>,
}

impl<T: Scalar> FitResult<T> {
    pub fn threshold(&self) -> Option<Threshold<T>> {
        self.t_thres.and_then(|t| Threshold::new(t).ok())
    }

    pub fn loglik_of(&self, user: &str) -> Option<LogLik<T>> {
        self.users.get(user).map(|u| u.loglik)
    }
}

fn check_users<T: Scalar>(users: &[UserSample<T>]) -> Result<()> {
    if users.is_empty() {
        return Err(Error::NoData("no users".into()));
    }
    if let Some(u) = users.iter().find(|u| u.n_pairs() == 0) {
        return Err(Error::NoData(format!("user {} has no consecutive waiting times", u.user_id)));
    }
    Ok(())
}

/// Fit every user at a fixed threshold (ignored for IP). Per-user fits run
/// in parallel; the total is reduced in input order.
pub fn fit_at_threshold<T: Scalar>(
    users: &[UserSample<T>],
    model: Model,
    t: Option<Threshold<T>>,
) -> Result<FitResult<T>> {
    check_users(users)?;
    let fits: Vec<UserFit<T>> = users
        .par_iter()
        .map(|u| fit_user(u, t, model))
        .collect::<Result<_>>()?;
    let loglik_total = fits.iter().map(|f| f.loglik).sum();
    let n_pairs_total = fits.iter().map(|f| f.n_pairs).sum();
    let degenerate_users = users
        .iter()
        .zip(&fits)
        .filter(|(_, f)| f.degenerate)
        .map(|(u, _)| u.user_id.clone())
        .collect();
    Ok(FitResult {
        model,
        t_thres: if model == Model::Ip { None } else { t.map(Threshold::seconds) },
        loglik_total,
        dof: model.dof(users.len()),
        n_users: users.len(),
        n_pairs_total,
        degenerate_users,
        users: users.iter().map(|u| u.user_id.clone()).zip(fits).collect(),
        source_digest: None,
    })
}

/// Grid search for the shared threshold. Returns the fit at the candidate
/// with the largest total log-likelihood; ties go to the smaller threshold.
/// Candidates at which every user is degenerate are not eligible.
pub fn fit_threshold<T: Scalar>(users: &[UserSample<T>], model: Model, grid: &ThresholdGrid<T>) -> Result<FitResult<T>> {
    if model == Model::Ip {
        return Err(Error::Config("IP has no threshold to search".into()));
    }
    check_users(users)?;
    let candidates = grid.candidates();
    let fits: Vec<FitResult<T>> = candidates
        .par_iter()
        .map(|&t| fit_at_threshold(users, model, Some(t)))
        .collect::<Result<_>>()?;

    let scores: Vec<Option<T>> = fits
        .iter()
        .map(|f| {
            if f.degenerate_users.len() == f.n_users {
                None
            } else {
                f.loglik_total.value()
            }
        })
        .collect();
    let best = first_argmax(&scores).ok_or_else(|| {
        Error::EstimationFailed(format!("every threshold candidate is degenerate for all users ({model})"))
    })?;
    Ok(fits.into_iter().nth(best).expect("index in range"))
}

/// Index of the first maximal score; `None` entries are ineligible.
fn first_argmax<T: Scalar>(scores: &[Option<T>]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(s) = *s else { continue };
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// Fit a model: IP directly, IT/MK with threshold search over `grid`.
pub fn fit_model<T: Scalar>(users: &[UserSample<T>], model: Model, grid: &ThresholdGrid<T>) -> Result<FitResult<T>> {
    match model {
        Model::Ip => fit_at_threshold(users, Model::Ip, None),
        _ => fit_threshold(users, model, grid),
    }
}

/// Sorted, deduplicated set of candidate thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdGrid<T> {
    candidates: Vec<Threshold<T>>,
}

impl<T: Scalar> ThresholdGrid<T> {
    pub fn new(values: impl IntoIterator<Item = T>) -> Result<Self> {
        let mut candidates = values.into_iter().map(Threshold::new).collect::<Result<Vec<_>>>()?;
        if candidates.is_empty() {
            return Err(Error::Config("threshold grid is empty".into()));
        }
        candidates.sort_by(|a, b| a.seconds().partial_cmp(&b.seconds()).expect("finite"));
        candidates.dedup();
        Ok(ThresholdGrid { candidates })
    }

    /// `n` logarithmically spaced points from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: T, hi: T, n: usize) -> Result<Self> {
        Self::spaced(lo, hi, n, true)
    }

    pub fn linear(lo: T, hi: T, n: usize) -> Result<Self> {
        Self::spaced(lo, hi, n, false)
    }

    fn spaced(lo: T, hi: T, n: usize, log: bool) -> Result<Self> {
        if n == 0 || !(lo <= hi) {
            return Err(Error::Config(format!("bad grid {lo}:{hi}:{n}")));
        }
        if n == 1 {
            return Self::new([lo]);
        }
        let (a, b) = if log { (lo.ln(), hi.ln()) } else { (lo, hi) };
        let step = (b - a) / T::of_usize(n - 1);
        Self::new((0..n).map(|i| {
            match i {
                0 => lo,
                _ if i == n - 1 => hi,
                _ if log => (a + step * T::of_usize(i)).exp(),
                _ => a + step * T::of_usize(i),
            }
        }))
    }

    /// Default: 60 log-spaced candidates from 2 s to 7200 s.
    pub fn default_grid() -> Self {
        Self::log_spaced(T::of(2.0), T::of(7200.0), 60).expect("valid default grid")
    }

    pub fn candidates(&self) -> &[Threshold<T>] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

impl<T: Scalar> FromStr for ThresholdGrid<T> {
    type Err = Error;

    /// `lo:hi:Nlog`, `lo:hi:Nlin`, or a comma-separated list of values.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse threshold grid {s:?}"));
        let num = |x: &str| -> Result<T> {
            x.trim().parse::<f64>().map(T::of).map_err(|_| bad())
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [lo, hi, tail] => {
                let tail = tail.trim();
                let (count, log) = if let Some(c) = tail.strip_suffix("log") {
                    (c, true)
                } else if let Some(c) = tail.strip_suffix("lin") {
                    (c, false)
                } else {
                    (tail, true)
                };
                let n: usize = count.trim().parse().map_err(|_| bad())?;
                Self::spaced(num(lo)?, num(hi)?, n, log)
            }
            [_] => Self::new(s.split(',').map(num).collect::<Result<Vec<_>>>()?),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use StateLabel::{Long as L, Short as S};

    fn th(x: f64) -> Threshold<f64> {
        Threshold::new(x).unwrap()
    }

    #[test]
    fn exponent_closed_form() {
        let g = fit_exponent(&[2.0, 4.0, 8.0], 1.0).unwrap().value().unwrap();
        assert_relative_eq!(g, 1.0 + 3.0 / (6.0 * 2f64.ln()), max_relative = 1e-14);
        assert_relative_eq!(g, 1.72135, epsilon = 1e-5);
        let g = fit_exponent(&[std::f64::consts::E * 5.0], 5.0).unwrap().value().unwrap();
        assert_relative_eq!(g, 2.0, max_relative = 1e-14);
        assert_eq!(fit_exponent(&[3.0, 3.0], 3.0).unwrap(), Exponent::Undefined);
        assert_eq!(fit_exponent::<f64>(&[], 3.0).unwrap(), Exponent::NoData);
        assert!(fit_exponent(&[2.0], 3.0).is_err());
    }

    fn labelled(labels: &[StateLabel]) -> Vec<SuccessorSample<f64>> {
        // successor i carries labels[i+1] with predecessor labels[i]
        labels
            .windows(2)
            .map(|w| SuccessorSample { prev: w[0], time: if w[1] == S { 10.0 } else { 100.0 } })
            .collect()
    }

    #[test]
    fn probabilities_from_transitions() {
        let f = fit_probabilities(&labelled(&[S, S, L, S]), th(60.0));
        assert_eq!(f.short_after_short.as_ratio(), Some(Ratio::new(1, 2)));
        assert_eq!(f.short_after_long.as_ratio(), Some(Ratio::new(1, 1)));

        let f = fit_probabilities(&labelled(&[S, S, S, S]), th(60.0));
        assert_eq!(f.short.value::<f64>(), Some(1.0));
        assert_eq!(f.short_after_short.value::<f64>(), Some(1.0));
        assert_eq!(f.short_after_long.value::<f64>(), None);

        let f = fit_probabilities(&labelled(&[S, L, S, L, S, L]), th(60.0));
        assert_eq!(f.short_after_short.value::<f64>(), Some(0.0));
        assert_eq!(f.short_after_long.value::<f64>(), Some(1.0));
    }

    #[test]
    fn all_long_user_collapses_to_power_law() {
        let blocks = vec![vec![100.0, 250.0, 61.0, 3000.0, 75.0, 90.0]];
        let user = UserSample::new("u", blocks);
        let fit = fit_user(&user, Some(th(60.0)), Model::It).unwrap();
        let UserParams::It { p_s, gamma } = fit.params else { panic!() };
        assert_eq!(p_s, 0.0);
        let tail: Vec<f64> = user.successor_times().collect();
        let expected = fit_exponent(&tail, 60.0).unwrap().value();
        assert_eq!(gamma, expected);
        assert!(!fit.degenerate);
    }

    #[test]
    fn single_pair_user() {
        let user = UserSample::new("u", vec![vec![10.0, 200.0]]);
        let fit = fit_user(&user, Some(th(60.0)), Model::Mk).unwrap();
        let UserParams::Mk { p_s, p_s_given_s, p_s_given_l, gamma_s, gamma_l } = fit.params else { panic!() };
        assert_eq!(p_s, 0.0);
        assert_eq!(p_s_given_s, Some(0.0));
        assert_eq!(p_s_given_l, None);
        assert_relative_eq!(gamma_s.unwrap(), 1.0 + 1.0 / (200f64 / 60.0).ln(), max_relative = 1e-14);
        assert_eq!(gamma_l, None);
        assert!(fit.degenerate);
        assert!(fit.loglik.value().is_some());
    }

    #[test]
    fn fitted_loglik_matches_model_core() {
        let user = UserSample::new(
            "u",
            vec![vec![5.0, 70.0, 12.0, 30.0, 900.0, 61.0, 2.0, 4000.0], vec![80.0, 3.0, 150.0, 9.0, 65.0]],
        );
        let t = th(60.0);
        let s = user.successor_samples(t);
        let fit = fit_user(&user, Some(t), Model::Mk).unwrap();
        let UserParams::Mk { p_s_given_s, p_s_given_l, gamma_s, gamma_l, .. } = fit.params else { panic!() };
        let p = model::MkParams {
            p_s_given_s: p_s_given_s.unwrap(),
            p_s_given_l: p_s_given_l.unwrap(),
            gamma_s: gamma_s.unwrap(),
            gamma_l: gamma_l.unwrap(),
        };
        assert_eq!(fit.loglik, model::loglik_mk(&s, &p, t).unwrap());

        let it = fit_user(&user, Some(t), Model::It).unwrap();
        let UserParams::It { p_s, gamma } = it.params else { panic!() };
        let expected = model::loglik_it(&s, &model::ItParams { p_s, gamma: gamma.unwrap() }, t).unwrap();
        assert_eq!(it.loglik, expected);
        assert!(fit.loglik.value().unwrap() >= it.loglik.value().unwrap());
    }

    #[test]
    fn ip_all_at_floor_is_degenerate() {
        let user = UserSample::new("u", vec![vec![1.0, 1.0, 1.0]]);
        let fit = fit_user(&user, None, Model::Ip).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.params, UserParams::Ip { gamma: None });
    }

    #[test]
    fn dof_accounting() {
        assert_eq!(Model::Ip.dof(10), 10);
        assert_eq!(Model::It.dof(10), 21);
        assert_eq!(Model::Mk.dof(10), 41);
    }

    #[test]
    fn grid_parsing_and_default() {
        let g: ThresholdGrid<f64> = ThresholdGrid::default_grid();
        assert_eq!(g.len(), 60);
        assert_relative_eq!(g.candidates()[0].seconds(), 2.0, max_relative = 1e-14);
        assert_eq!(g.candidates()[59].seconds(), 7200.0);
        let parsed: ThresholdGrid<f64> = "2:7200:60log".parse().unwrap();
        assert_eq!(parsed, g);
        let lin: ThresholdGrid<f64> = "10:30:3lin".parse().unwrap();
        let v: Vec<f64> = lin.candidates().iter().map(|t| t.seconds()).collect();
        assert_eq!(v, vec![10.0, 20.0, 30.0]);
        let list: ThresholdGrid<f64> = "120, 30,60".parse().unwrap();
        assert_eq!(list.candidates()[0].seconds(), 30.0);
        assert!("1:10:5log".parse::<ThresholdGrid<f64>>().is_err());
        assert!("abc".parse::<ThresholdGrid<f64>>().is_err());
    }

    #[test]
    fn single_candidate_grid() {
        let users = vec![UserSample::new("a", vec![vec![5.0, 70.0, 12.0, 300.0, 400.0, 9.0]])];
        let grid = ThresholdGrid::new([45.0]).unwrap();
        let fit = fit_threshold(&users, Model::Mk, &grid).unwrap();
        assert_eq!(fit.t_thres, Some(45.0));
    }

    #[test]
    fn tie_goes_to_smaller_threshold() {
        // candidates are sorted ascending, so the first maximum is the smallest threshold
        assert_eq!(first_argmax(&[Some(-3.0), Some(-1.0), Some(-1.0)]), Some(1));
        assert_eq!(first_argmax(&[None, Some(-2.0), None]), Some(1));
        assert_eq!(first_argmax::<f64>(&[None, None]), None);
    }

    #[test]
    fn all_degenerate_grid_fails() {
        let users = vec![UserSample::new("a", vec![vec![2.0, 3.0, 4.0]])];
        let grid = ThresholdGrid::new([100.0, 200.0]).unwrap();
        assert!(matches!(fit_threshold(&users, Model::Mk, &grid), Err(Error::EstimationFailed(_))));
    }

    #[test]
    fn no_pairs_is_an_error() {
        let users = vec![UserSample::<f64>::new("a", vec![vec![5.0]])];
        assert!(matches!(fit_at_threshold(&users, Model::Ip, None), Err(Error::NoData(_))));
    }

    proptest! {
        #[test]
        fn exponent_is_a_local_maximum(
            tail in proptest::collection::vec(1.0f64..1e4, 2..300),
            lb_frac in 0.1f64..1.0,
        ) {
            let lb = tail.iter().cloned().fold(f64::INFINITY, f64::min) * lb_frac;
            prop_assume!(lb > 1.0);
            let t = Threshold::new(lb).unwrap();
            let Exponent::Value(g) = fit_exponent(&tail, lb).unwrap() else { return Ok(()) };
            let ll = |gamma: f64| tail.iter().map(|&x| model::ln_power_law(x, gamma, t)).sum::<f64>();
            let best = ll(g);
            prop_assert!(ll(g + 1e-3) <= best);
            if g - 1e-3 > 1.0 {
                prop_assert!(ll(g - 1e-3) <= best);
            }
        }

        #[test]
        fn frequencies_are_exact_count_ratios(
            raw in proptest::collection::vec((any::<bool>(), 0.0f64..200.0), 1..300),
        ) {
            let s: Vec<_> = raw.iter().map(|&(b, time)| SuccessorSample { prev: if b { S } else { L }, time }).collect();
            let f = fit_probabilities(&s, th(60.0));
            for freq in [f.short, f.short_after_short, f.short_after_long] {
                if let Some(r) = freq.as_ratio() {
                    prop_assert_eq!(r * Ratio::from_integer(freq.trials), Ratio::from_integer(freq.hits));
                    prop_assert_eq!(freq.value::<f64>().unwrap(), freq.hits as f64 / freq.trials as f64);
                }
            }
            prop_assert_eq!(f.short.trials, s.len() as u64);
            prop_assert_eq!(f.short_after_short.trials + f.short_after_long.trials, s.len() as u64);
        }

        #[test]
        fn mk_never_below_it_at_shared_threshold(
            blocks in proptest::collection::vec(proptest::collection::vec(1u32..5000, 2..60), 1..5),
            t in 2.0f64..500.0,
        ) {
            let blocks: Vec<Vec<f64>> = blocks.into_iter().map(|b| b.into_iter().map(f64::from).collect()).collect();
            let user = UserSample::new("u", blocks);
            let t = th(t);
            let mk = fit_user(&user, Some(t), Model::Mk).unwrap();
            let it = fit_user(&user, Some(t), Model::It).unwrap();
            if !mk.degenerate && !it.degenerate {
                let (a, b) = (mk.loglik.value().unwrap(), it.loglik.value().unwrap());
                prop_assert!(a >= b - 1e-9 * b.abs().max(1.0), "mk {} < it {}", a, b);
            }
        }
    }
}
