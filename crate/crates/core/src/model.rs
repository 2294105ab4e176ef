//! The three nested inter-event models and their exact log-likelihoods.
//!
//! Waiting times below the platform threshold are *short* (user in the
//! intensive state S) and are modelled by a uniform density on
//! `[0, t_thres)`. Times at or above the threshold are *long* (occasional
//! state L) and follow a power law on `[t_thres, ∞)`:
//!
//! ```text
//! ρ(t) = (γ − 1)/t_thres · (t/t_thres)^(−γ)
//! ```
//!
//! * IP: every time is power-law distributed with lower bound 1 s.
//! * IT: i.i.d. mixture `p_S·f_U + (1 − p_S)·ρ`.
//! * MK: the mixture weights and the tail exponent depend on the label of
//!   the previous waiting time (one-step memory).
//!
//! The uniform and power-law supports are disjoint, so each likelihood term
//! picks exactly one branch of the mixture.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;

/// Latent activity state attached to a waiting time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateLabel {
    /// Short waiting time, intensive state.
    #[serde(rename = "S")]
    Short,
    /// Long waiting time, occasional state.
    #[serde(rename = "L")]
    Long,
}

impl StateLabel {
    pub fn is_short(self) -> bool {
        self == StateLabel::Short
    }
}

/// Platform-wide short/long threshold, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Threshold<T>(T);

impl<T: Scalar> Threshold<T> {
    /// A threshold must exceed the one-second timestamp resolution.
    pub fn new(seconds: T) -> Result<Self> {
        if !seconds.is_finite() || seconds <= T::one() {
            return Err(domain(format!("threshold must be finite and > 1 s, got {seconds}")));
        }
        Ok(Threshold(seconds))
    }

    /// The 1 s lower bound used by the IP model. Not a valid platform threshold.
    pub(crate) fn unit() -> Self {
        Threshold(T::one())
    }

    pub fn seconds(self) -> T {
        self.0
    }

    pub fn label(self, time: T) -> StateLabel {
        if time < self.0 {
            StateLabel::Short
        } else {
            StateLabel::Long
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpParams<T> {
    pub gamma: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItParams<T> {
    pub p_s: T,
    pub gamma: T,
}

/// Per-user parameters of the Markovian model. The transition matrix is
/// `[[p_S|S, p_S|L], [1 − p_S|S, 1 − p_S|L]]`, so columns sum to one by
/// construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MkParams<T> {
    pub p_s_given_s: T,
    pub p_s_given_l: T,
    /// Exponent of transition times (long after short).
    pub gamma_s: T,
    /// Exponent of stand-by times (long after long).
    pub gamma_l: T,
}

fn check_probability<T: Scalar>(name: &str, p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(domain(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_exponent<T: Scalar>(name: &str, gamma: T) -> Result<()> {
    if !(gamma.is_finite() && gamma > T::one()) {
        return Err(domain(format!("{name} must be finite and > 1, got {gamma}")));
    }
    Ok(())
}

impl<T: Scalar> IpParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_exponent("gamma", self.gamma)
    }
}

impl<T: Scalar> ItParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_probability("p_S", self.p_s)?;
        check_exponent("gamma", self.gamma)
    }
}

impl<T: Scalar> MkParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_probability("p_S|S", self.p_s_given_s)?;
        check_probability("p_S|L", self.p_s_given_l)?;
        check_exponent("gamma_S", self.gamma_s)?;
        check_exponent("gamma_L", self.gamma_l)
    }

    /// Probability of a short time given the previous label.
    pub fn p_short_after(&self, prev: StateLabel) -> T {
        match prev {
            StateLabel::Short => self.p_s_given_s,
            StateLabel::Long => self.p_s_given_l,
        }
    }

    pub fn gamma_after(&self, prev: StateLabel) -> T {
        match prev {
            StateLabel::Short => self.gamma_s,
            StateLabel::Long => self.gamma_l,
        }
    }

    /// MK parameters equivalent to an IT model: memory removed.
    pub fn tied(p: ItParams<T>) -> Self {
        MkParams {
            p_s_given_s: p.p_s,
            p_s_given_l: p.p_s,
            gamma_s: p.gamma,
            gamma_l: p.gamma,
        }
    }
}

/// A waiting time together with the label of its predecessor in the same
/// block. All likelihoods are evaluated over these.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessorSample<T> {
    pub prev: StateLabel,
    pub time: T,
}

/// A log-likelihood, or the marker for a model that assigns zero density
/// to some observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogLik<T> {
    Finite(T),
    Degenerate,
}

impl<T: Scalar> LogLik<T> {
    pub fn zero() -> Self {
        LogLik::Finite(T::zero())
    }

    pub fn value(self) -> Option<T> {
        match self {
            LogLik::Finite(v) => Some(v),
            LogLik::Degenerate => None,
        }
    }

    pub fn is_degenerate(self) -> bool {
        matches!(self, LogLik::Degenerate)
    }
}

impl<T: Scalar> Add for LogLik<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (LogLik::Finite(a), LogLik::Finite(b)) => LogLik::Finite(a + b),
            _ => LogLik::Degenerate,
        }
    }
}

impl<T: Scalar> AddAssign for LogLik<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Scalar> std::iter::Sum for LogLik<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(LogLik::zero(), Add::add)
    }
}

// Serialized as a plain number, or the string "-inf" for the marker.
impl<T: Serialize> Serialize for LogLik<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LogLik::Finite(v) => v.serialize(s),
            LogLik::Degenerate => s.serialize_str("-inf"),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for LogLik<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Num(T),
            Marker(String),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Num(v) => Ok(LogLik::Finite(v)),
            Repr::Marker(m) if m == "-inf" => Ok(LogLik::Degenerate),
            Repr::Marker(m) => Err(serde::de::Error::custom(format!("bad log-likelihood marker {m:?}"))),
        }
    }
}

pub fn classify<T: Scalar>(times: &[T], t: Threshold<T>) -> Vec<StateLabel> {
    times.iter().map(|&x| t.label(x)).collect()
}

fn check_time<T: Scalar>(time: T) -> Result<()> {
    if !(time >= T::zero()) || !time.is_finite() {
        return Err(domain(format!("waiting time must be finite and >= 0, got {time}")));
    }
    Ok(())
}

/// Log of the power-law density at `time ≥ t_thres`; no argument checks.
#[inline]
pub(crate) fn ln_power_law<T: Scalar>(time: T, gamma: T, t: Threshold<T>) -> T {
    let ln_t = t.seconds().ln();
    (gamma - T::one()).ln() - ln_t - gamma * (time.ln() - ln_t)
}

/// Power-law density of long waiting times, zero below the threshold.
pub fn density_long<T: Scalar>(time: T, gamma: T, t: Threshold<T>) -> Result<T> {
    check_time(time)?;
    check_exponent("gamma", gamma)?;
    if time < t.seconds() {
        return Ok(T::zero());
    }
    Ok(ln_power_law(time, gamma, t).exp())
}

/// Uniform density of short waiting times on `[0, t_thres)`.
pub fn density_short<T: Scalar>(time: T, t: Threshold<T>) -> Result<T> {
    check_time(time)?;
    if time < t.seconds() {
        Ok(t.seconds().recip())
    } else {
        Ok(T::zero())
    }
}

/// IP log-likelihood: power law with lower bound 1 s for every sample.
pub fn loglik_ip<T: Scalar>(samples: &[SuccessorSample<T>], p: &IpParams<T>) -> Result<LogLik<T>> {
    p.validate()?;
    let unit = Threshold::unit();
    let mut acc = T::zero();
    for s in samples {
        check_time(s.time)?;
        if s.time < T::one() {
            return Err(domain(format!("IP requires waiting times >= 1 s, got {}", s.time)));
        }
        acc = acc + ln_power_law(s.time, p.gamma, unit);
    }
    Ok(LogLik::Finite(acc))
}

pub fn loglik_it<T: Scalar>(
    samples: &[SuccessorSample<T>],
    p: &ItParams<T>,
    t: Threshold<T>,
) -> Result<LogLik<T>> {
    p.validate()?;
    loglik_mk(samples, &MkParams::tied(*p), t)
}

pub fn loglik_mk<T: Scalar>(
    samples: &[SuccessorSample<T>],
    p: &MkParams<T>,
    t: Threshold<T>,
) -> Result<LogLik<T>> {
    p.validate()?;
    mixture_loglik(
        samples,
        |prev| p.p_short_after(prev),
        |prev| Some(p.gamma_after(prev)),
        t,
    )
}

/// Shared evaluator for the threshold mixtures. An exponent of `None` means
/// it could not be estimated; the density factor of those long terms is
/// then left out and only their branch probability is kept.
pub(crate) fn mixture_loglik<T, P, G>(
    samples: &[SuccessorSample<T>],
    p_short: P,
    gamma: G,
    t: Threshold<T>,
) -> Result<LogLik<T>>
where
    T: Scalar,
    P: Fn(StateLabel) -> T,
    G: Fn(StateLabel) -> Option<T>,
{
    let ln_t = t.seconds().ln();
    let mut acc = T::zero();
    for s in samples {
        check_time(s.time)?;
        let ps = p_short(s.prev);
        if s.time < t.seconds() {
            if ps <= T::zero() {
                return Ok(LogLik::Degenerate);
            }
            acc = acc + ps.ln() - ln_t;
        } else {
            let pl = T::one() - ps;
            if pl <= T::zero() {
                return Ok(LogLik::Degenerate);
            }
            acc = acc + pl.ln();
            if let Some(g) = gamma(s.prev) {
                acc = acc + ln_power_law(s.time, g, t);
            }
        }
    }
    Ok(LogLik::Finite(acc))
}

/// Stationary probability of the short state for the two-state chain.
pub fn stationary_p_s<T: Scalar>(p: &MkParams<T>) -> Result<T> {
    check_probability("p_S|S", p.p_s_given_s)?;
    check_probability("p_S|L", p.p_s_given_l)?;
    let denom = p.p_s_given_l + (T::one() - p.p_s_given_s);
    if denom <= T::zero() {
        return Err(Error::UndefinedStationary);
    }
    Ok(p.p_s_given_l / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn th(x: f64) -> Threshold<f64> {
        Threshold::new(x).unwrap()
    }

    fn samples(prev: StateLabel, times: &[f64]) -> Vec<SuccessorSample<f64>> {
        times.iter().map(|&time| SuccessorSample { prev, time }).collect()
    }

    #[test]
    fn classify_timeline_example() {
        use StateLabel::*;
        let labels = classify(&[120.0, 180.0, 30.0, 45.0, 120.0], th(60.0));
        assert_eq!(labels, vec![Long, Long, Short, Short, Long]);
        assert_eq!(classify(&[60.0], th(60.0)), vec![Long]);
        assert!(classify(&[1.0, 5.0, 59.9], th(60.0)).iter().all(|l| l.is_short()));
    }

    #[test]
    fn threshold_rejects_floor() {
        assert!(Threshold::new(1.0).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
        assert!(Threshold::new(1.5).is_ok());
    }

    #[test]
    fn density_long_values() {
        assert_relative_eq!(density_long(60.0, 2.0, th(60.0)).unwrap(), 1.0 / 60.0, max_relative = 1e-14);
        assert_relative_eq!(density_long(120.0, 2.0, th(60.0)).unwrap(), 0.25 / 60.0, max_relative = 1e-14);
        assert_eq!(density_long(30.0, 2.0, th(60.0)).unwrap(), 0.0);
        assert!(matches!(density_long(-1.0, 2.0, th(60.0)), Err(Error::Domain(_))));
        assert!(density_long(100.0, 1.0, th(60.0)).is_err());
    }

    #[test]
    fn density_short_values() {
        assert_eq!(density_short(30.0, th(60.0)).unwrap(), 1.0 / 60.0);
        assert_eq!(density_short(60.0, th(60.0)).unwrap(), 0.0);
        assert_eq!(density_short(0.0, th(60.0)).unwrap(), 1.0 / 60.0);
        assert!(density_short(-0.5, th(60.0)).is_err());
    }

    #[test]
    fn loglik_ip_values() {
        let p = IpParams { gamma: 2.0 };
        let one = samples(StateLabel::Long, &[1.0]);
        assert_eq!(loglik_ip(&one, &p).unwrap(), LogLik::Finite(0.0));
        let s = samples(StateLabel::Long, &[2.0, 4.0, 8.0]);
        let ll = loglik_ip(&s, &p).unwrap().value().unwrap();
        assert_relative_eq!(ll, -12.0 * 2f64.ln(), max_relative = 1e-14);
        assert_eq!(loglik_ip(&[], &p).unwrap(), LogLik::Finite(0.0));
        let bad = samples(StateLabel::Long, &[0.5]);
        assert!(matches!(loglik_ip(&bad, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn loglik_it_values() {
        let p = ItParams { p_s: 0.5, gamma: 2.0 };
        let s = samples(StateLabel::Long, &[30.0]);
        let ll = loglik_it(&s, &p, th(60.0)).unwrap().value().unwrap();
        assert_relative_eq!(ll, (0.5f64 / 60.0).ln(), max_relative = 1e-14);
        assert_eq!(loglik_it(&[], &p, th(60.0)).unwrap(), LogLik::Finite(0.0));

        // p_S = 0 with all-long samples is a power law with lower bound t_thres.
        let long = samples(StateLabel::Short, &[61.0, 90.0, 400.0, 7200.0]);
        let it = loglik_it(&long, &ItParams { p_s: 0.0, gamma: 1.7 }, th(60.0)).unwrap().value().unwrap();
        let direct: f64 = long.iter().map(|s| density_long(s.time, 1.7, th(60.0)).unwrap().ln()).sum();
        assert_relative_eq!(it, direct, max_relative = 1e-12);
    }

    #[test]
    fn zero_probability_branch_is_marked() {
        let short = samples(StateLabel::Long, &[10.0]);
        let long = samples(StateLabel::Long, &[100.0]);
        let ll = loglik_it(&short, &ItParams { p_s: 0.0, gamma: 2.0 }, th(60.0)).unwrap();
        assert!(ll.is_degenerate());
        let ll = loglik_it(&long, &ItParams { p_s: 1.0, gamma: 2.0 }, th(60.0)).unwrap();
        assert!(ll.is_degenerate());
        let mk = MkParams { p_s_given_s: 1.0, p_s_given_l: 0.5, gamma_s: 2.0, gamma_l: 2.0 };
        let s = samples(StateLabel::Short, &[100.0]);
        assert!(loglik_mk(&s, &mk, th(60.0)).unwrap().is_degenerate());
    }

    #[test]
    fn loglik_mk_short_after_short() {
        let mk = MkParams { p_s_given_s: 0.8, p_s_given_l: 0.1, gamma_s: 2.0, gamma_l: 1.5 };
        let s = samples(StateLabel::Short, &[30.0]);
        let ll = loglik_mk(&s, &mk, th(60.0)).unwrap().value().unwrap();
        assert_relative_eq!(ll, (0.8f64 / 60.0).ln(), max_relative = 1e-14);
        assert_eq!(loglik_mk(&[], &mk, th(60.0)).unwrap(), LogLik::Finite(0.0));
    }

    #[test]
    fn stationary_values() {
        let p = |ss, sl| MkParams { p_s_given_s: ss, p_s_given_l: sl, gamma_s: 2.0, gamma_l: 2.0 };
        assert_eq!(stationary_p_s(&p(0.5, 0.5)).unwrap(), 0.5);
        assert_relative_eq!(stationary_p_s(&p(0.8, 0.4)).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_eq!(stationary_p_s(&p(0.3, 0.0)).unwrap(), 0.0);
        assert!(matches!(stationary_p_s(&p(1.0, 0.0)), Err(Error::UndefinedStationary)));
    }

    #[test]
    fn loglik_serde_marker() {
        let v: Vec<LogLik<f64>> = vec![LogLik::Finite(-1.5), LogLik::Degenerate];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[-1.5,"-inf"]"#);
        let back: Vec<LogLik<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn works_in_f32() {
        let t = Threshold::new(60.0f32).unwrap();
        let d = density_long(120.0f32, 2.0, t).unwrap();
        assert!((d - 0.25 / 60.0).abs() < 1e-7);
    }

    /// Composite Simpson on [a, b].
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    /// Quadrature on a log grid plus the closed-form tail beyond `t_max`.
    fn long_mass(gamma: f64, t: f64) -> f64 {
        let t_max = t * 1e4;
        // Substitute x = ln(time) so the integrand is smooth.
        let body = simpson(
            |x| {
                let time = x.exp().max(t);
                density_long(time, gamma, th(t)).unwrap() * time
            },
            t.ln(),
            t_max.ln(),
            20_000,
        );
        let tail = (t_max / t).powf(1.0 - gamma);
        body + tail
    }

    proptest! {
        #[test]
        fn long_density_normalizes(gamma in 1.05f64..4.0, t in 1.5f64..5000.0) {
            prop_assert!((long_mass(gamma, t) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn mixture_normalizes(p_s in 0.0f64..=1.0, gamma in 1.05f64..4.0, t in 1.5f64..5000.0) {
            let short = simpson(|x| density_short(x, th(t)).unwrap(), 0.0, t * (1.0 - 1e-12), 2);
            let total = p_s * short + (1.0 - p_s) * long_mass(gamma, t);
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn mk_with_tied_params_equals_it(
            p_s in 0.01f64..0.99,
            gamma in 1.05f64..4.0,
            t in 1.5f64..500.0,
            raw in proptest::collection::vec((any::<bool>(), 0.0f64..5000.0), 0..200),
        ) {
            let s: Vec<_> = raw.iter().map(|&(b, time)| SuccessorSample {
                prev: if b { StateLabel::Short } else { StateLabel::Long }, time,
            }).collect();
            let it = loglik_it(&s, &ItParams { p_s, gamma }, th(t)).unwrap().value().unwrap();
            let mk = loglik_mk(&s, &MkParams::tied(ItParams { p_s, gamma }), th(t)).unwrap().value().unwrap();
            prop_assert!((it - mk).abs() <= 1e-12 * it.abs().max(1.0));
        }

        #[test]
        fn it_with_unit_bound_and_no_short_mass_equals_ip(
            gamma in 1.05f64..4.0,
            times in proptest::collection::vec(1.0f64..1e6, 0..200),
        ) {
            let s = samples(StateLabel::Long, &times);
            let ip = loglik_ip(&s, &IpParams { gamma }).unwrap().value().unwrap();
            let it = mixture_loglik(&s, |_| 0.0, |_| Some(gamma), Threshold::unit()).unwrap().value().unwrap();
            prop_assert!((ip - it).abs() <= 1e-12 * ip.abs().max(1.0));
        }

        #[test]
        fn classify_invariant_under_monotone_rescaling(
            times in proptest::collection::vec(0.0f64..1e5, 1..100),
            t in 1.5f64..1e4,
            k in 0.01f64..100.0,
        ) {
            let base = classify(&times, th(t));
            // x -> k·x^0.5 + 2 is strictly increasing
            let f = |x: f64| k * x.sqrt() + 2.0;
            let scaled: Vec<f64> = times.iter().map(|&x| f(x)).collect();
            prop_assert_eq!(base, classify(&scaled, th(f(t))));
        }
    }
}
