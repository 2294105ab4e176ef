//! Dependence ratio `r = p_SS / p_S²` between consecutive short times.

use serde::{Deserialize, Serialize};

use crate::estimate::{Frequency, UserSample};
use crate::model::{StateLabel, Threshold};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceRatio<T> {
    /// Short labels over all labels.
    pub short: Frequency,
    /// `(S, S)` adjacent pairs over all adjacent pairs within blocks.
    pub short_short: Frequency,
    /// `None` when no short label or no adjacent pair was observed.
    pub r: Option<T>,
}

impl<T: Scalar> DependenceRatio<T> {
    pub fn p_s(&self) -> Option<T> {
        self.short.value()
    }

    pub fn p_ss(&self) -> Option<T> {
        self.short_short.value()
    }

    /// Large-sample standard error of `r` when labels are i.i.d. with the
    /// observed `p_S`: `(1 − p_S) / (p_S √n)`.
    pub fn iid_standard_error(&self) -> Option<T> {
        let p = self.p_s()?;
        if p <= T::zero() || self.short.trials == 0 {
            return None;
        }
        Some((T::one() - p) / (p * T::of(self.short.trials as f64).sqrt()))
    }
}

/// Ratio over label blocks; pairs never straddle two blocks.
pub fn dependence_ratio<T: Scalar>(blocks: &[Vec<StateLabel>]) -> DependenceRatio<T> {
    let mut short = Frequency::default();
    let mut short_short = Frequency::default();
    for block in blocks {
        for l in block {
            short.record(l.is_short());
        }
        for w in block.windows(2) {
            short_short.record(w[0].is_short() && w[1].is_short());
        }
    }
    let r = match (short.value::<T>(), short_short.value::<T>()) {
        (Some(p), Some(pp)) if p > T::zero() => Some(pp / (p * p)),
        _ => None,
    };
    DependenceRatio { short, short_short, r }
}

pub fn user_dependence_ratio<T: Scalar>(user: &UserSample<T>, t: Threshold<T>) -> DependenceRatio<T> {
    let labels: Vec<Vec<StateLabel>> = user
        .blocks
        .iter()
        .map(|b| b.iter().map(|&x| t.label(x)).collect())
        .collect();
    dependence_ratio(&labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport<T> {
    pub threshold: T,
    pub users: Vec<(String, DependenceRatio<T>)>,
    pub median_r: Option<T>,
    /// Users whose ratio is undefined.
    pub undefined: usize,
}

pub fn ratio_report<T: Scalar>(users: &[UserSample<T>], t: Threshold<T>) -> RatioReport<T> {
    let rows: Vec<(String, DependenceRatio<T>)> = users
        .iter()
        .map(|u| (u.user_id.clone(), user_dependence_ratio(u, t)))
        .collect();
    let rs: Vec<T> = rows.iter().filter_map(|(_, d)| d.r).collect();
    RatioReport {
        threshold: t.seconds(),
        undefined: rows.len() - rs.len(),
        median_r: super::median(&rs),
        users: rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use StateLabel::{Long as L, Short as S};

    #[test]
    fn hand_counted() {
        let d = dependence_ratio::<f64>(&[vec![S, S, L]]);
        assert_eq!(d.p_ss(), Some(0.5));
        assert_relative_eq!(d.p_s().unwrap(), 2.0 / 3.0);
        assert_relative_eq!(d.r.unwrap(), 1.125, max_relative = 1e-14);
        let d = dependence_ratio::<f64>(&[vec![S, S, S, S]]);
        assert_eq!(d.r, Some(1.0));
        assert_eq!(dependence_ratio::<f64>(&[vec![L, L]]).r, None);
    }

    #[test]
    fn pairs_do_not_straddle_blocks() {
        let d = dependence_ratio::<f64>(&[vec![S], vec![S, L]]);
        assert_eq!(d.short_short, Frequency { hits: 0, trials: 1 });
        assert_eq!(d.short, Frequency { hits: 2, trials: 3 });
    }

    #[test]
    fn iid_standard_error_matches_replicate_spread() {
        // Empirical spread of r over replicates versus the delta-method formula.
        let (p, n, reps) = (0.3, 4000, 400);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rs = Vec::new();
        let mut se = 0.0;
        for _ in 0..reps {
            let labels: Vec<StateLabel> = (0..n).map(|_| if rng.random::<f64>() < p { S } else { L }).collect();
            let d = dependence_ratio::<f64>(&[labels]);
            se += d.iid_standard_error().unwrap() / reps as f64;
            rs.push(d.r.unwrap());
        }
        let mean = rs.iter().sum::<f64>() / reps as f64;
        let sd = (rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd / (reps as f64).sqrt() + 1e-3, "mean {mean}");
        assert!((sd / se - 1.0).abs() < 0.15, "sd {sd} se {se}");
    }
}
