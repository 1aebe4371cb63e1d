//! Power of rOP and vote counting.
//!
//! rOP rejects when `p_(r) <= beta` with `beta = B_alpha(r, K - r + 1)`. Under
//! the alternative, `r0` studies have `P(p_k <= beta) = beta'` and the other
//! `K - r0` have `P(p_k <= beta) = beta`, so power is a binomial-convolution
//! tail: the probability of at least `r` successes among the K studies.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{beta_quantile, binomial_pmf, binomial_sf, welch_t_test, Sides};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// Every one of the `r0` affected studies succeeds with probability `beta'`.
    Equal { beta_prime: f64 },
    /// Per-study success probabilities `P(p_k <= beta)`.
    Unequal { success_probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub k: usize,
    pub r: usize,
    pub r0: usize,
    pub alpha: f64,
    pub effect: Effect,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

impl PowerSpec {
    pub fn equal(k: usize, r: usize, r0: usize, alpha: f64, beta_prime: f64) -> Self {
        PowerSpec { k, r, r0, alpha, effect: Effect::Equal { beta_prime } }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("K must be at least 1".into()));
        }
        if self.r == 0 || self.r > self.k {
            return Err(Error::ROutOfRange { r: self.r, k: self.k });
        }
        if self.r0 > self.k {
            return Err(Error::Validation(format!("r0 = {} exceeds K = {}", self.r0, self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        match &self.effect {
            Effect::Equal { beta_prime } => check_unit("beta'", *beta_prime),
            Effect::Unequal { success_probs } => {
                if success_probs.len() != self.k {
                    return Err(Error::Validation(format!(
                        "{} success probabilities for K = {}",
                        success_probs.len(),
                        self.k
                    )));
                }
                success_probs.iter().try_for_each(|p| check_unit("success probability", *p))
            }
        }
    }

    /// Rejection threshold `B_alpha(r, K - r + 1)`.
    pub fn beta(&self) -> Result<f64> {
        beta_quantile(self.alpha, self.r as f64, (self.k - self.r + 1) as f64)
    }

    /// Per-study success probabilities implied by the spec.
    pub fn success_probs(&self) -> Result<Vec<f64>> {
        match &self.effect {
            Effect::Unequal { success_probs } => Ok(success_probs.clone()),
            Effect::Equal { beta_prime } => {
                let beta = self.beta()?;
                Ok((0..self.k).map(|i| if i < self.r0 { *beta_prime } else { beta }).collect())
            }
        }
    }

    /// Power via the double binomial sum (equal effects) or the
    /// Poisson-binomial recursion (unequal effects).
    pub fn power(&self) -> Result<f64> {
        match self.effect {
            Effect::Equal { .. } => rop_power_equal(self),
            Effect::Unequal { .. } => rop_power_poisson_binomial(self),
        }
    }
}

/// Closed-form rOP power with `r0` studies at `beta'` and the rest at `beta`.
pub fn rop_power_equal(spec: &PowerSpec) -> Result<f64> {
    spec.validate()?;
    let Effect::Equal { beta_prime } = spec.effect else {
        return Err(Error::Validation("equal-effect power needs beta'".into()));
    };
    let beta = spec.beta()?;
    let (k, r, r0) = (spec.k as u64, spec.r as u64, spec.r0 as u64);
    let mut total = 0.0;
    for i in r..=k {
        let lo = (i + r0).saturating_sub(k);
        for j in lo..=i.min(r0) {
            total += binomial_pmf(j, r0, beta_prime)? * binomial_pmf(i - j, k - r0, beta)?;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Distribution of the number of successes among independent Bernoulli trials.
pub fn poisson_binomial_pmf(probs: &[f64]) -> Vec<f64> {
    let mut dist = vec![0.0; probs.len() + 1];
    dist[0] = 1.0;
    for (n, &p) in probs.iter().enumerate() {
        for c in (0..=n + 1).rev() {
            let stay = dist[c] * (1.0 - p);
            let up = if c > 0 { dist[c - 1] * p } else { 0.0 };
            dist[c] = stay + up;
        }
    }
    dist
}

/// `P(#successes >= r)` for heterogeneous success probabilities.
pub fn poisson_binomial_sf(probs: &[f64], r: usize) -> f64 {
    poisson_binomial_pmf(probs)[r.min(probs.len() + 1)..].iter().sum::<f64>().clamp(0.0, 1.0)
}

/// rOP power for per-study success probabilities, by dynamic programming.
pub fn rop_power_poisson_binomial(spec: &PowerSpec) -> Result<f64> {
    spec.validate()?;
    Ok(poisson_binomial_sf(&spec.success_probs()?, spec.r))
}

/// Which parameter a power curve sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// r = 1..K at fixed r0.
    R { r0: usize },
    /// r0 = 0..K at fixed r.
    R0 { r: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub k: usize,
    pub r: usize,
    pub r0: usize,
    pub alpha: f64,
    pub beta_prime: f64,
    pub beta: f64,
    pub power: f64,
}

/// rOP power tabulated along `r` or `r0`.
pub fn power_curve(k: usize, sweep: Sweep, alpha: f64, beta_prime: f64) -> Result<Vec<PowerPoint>> {
    let specs: Vec<PowerSpec> = match sweep {
        Sweep::R { r0 } => (1..=k).map(|r| PowerSpec::equal(k, r, r0, alpha, beta_prime)).collect(),
        Sweep::R0 { r } => (0..=k).map(|r0| PowerSpec::equal(k, r, r0, alpha, beta_prime)).collect(),
    };
    specs
        .par_iter()
        .map(|s| {
            Ok(PowerPoint {
                k: s.k,
                r: s.r,
                r0: s.r0,
                alpha,
                beta_prime,
                beta: s.beta()?,
                power: rop_power_equal(s)?,
            })
        })
        .collect()
}

/// Critical count for vote counting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum VoteCriterion {
    /// Reject when the significant share exceeds `pi0`: count >= floor(pi0 K) + 1.
    Proportion { pi0: f64 },
    /// Smallest count whose BIN(K, alpha_vc) exceedance probability is <= `level`.
    NullLevel { alpha_vc: f64, level: f64 },
}

impl VoteCriterion {
    pub fn critical_count(&self, k: usize) -> Result<u64> {
        match *self {
            VoteCriterion::Proportion { pi0 } => {
                check_unit("pi0", pi0)?;
                Ok((pi0 * k as f64).floor() as u64 + 1)
            }
            VoteCriterion::NullLevel { alpha_vc, level } => {
                check_unit("alpha_vc", alpha_vc)?;
                check_unit("level", level)?;
                for c in 0..=k as u64 {
                    if binomial_sf(c, k as u64, alpha_vc)? <= level {
                        return Ok(c);
                    }
                }
                Ok(k as u64 + 1)
            }
        }
    }
}

/// Exact vote-counting power when each study is significant with
/// probability `single_study_power`.
pub fn vote_counting_power(k: usize, single_study_power: f64, criterion: VoteCriterion) -> Result<f64> {
    if k == 0 {
        return Err(Error::Validation("K must be at least 1".into()));
    }
    check_unit("single-study power", single_study_power)?;
    let c = criterion.critical_count(k)?;
    if c > k as u64 {
        return Ok(0.0);
    }
    binomial_sf(c, k as u64, single_study_power)
}

/// rOP-style count power: `P(BIN(K, success) >= ceil(fraction K))`.
pub fn count_power(k: usize, success: f64, fraction: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Validation("K must be at least 1".into()));
    }
    check_unit("success", success)?;
    check_unit("fraction", fraction)?;
    let r = ((fraction * k as f64).ceil() as u64).max(1);
    binomial_sf(r, k as u64, success)
}

/// Monte Carlo estimate of a two-sample Welch test's power at threshold
/// `level`: P(two-sided p <= level) for a mean shift `effect` (in SD units).
///
/// This is approximate by construction; the standard error is about
/// `sqrt(power (1 - power) / draws)`.
pub fn welch_power_mc(effect: f64, n_case: usize, n_control: usize, level: f64, draws: usize, seed: u64) -> Result<f64> {
    if n_case < 2 || n_control < 2 {
        return Err(Error::Validation("Welch power needs at least 2 samples per group".into()));
    }
    if draws == 0 {
        return Err(Error::Validation("draws must be positive".into()));
    }
    check_unit("level", level)?;
    const CHUNK: usize = 1024;
    let chunks = draws.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, Domain::MonteCarlo, c as u64, 0);
            let n = CHUNK.min(draws - c * CHUNK);
            let mut a = vec![0.0; n_case];
            let mut b = vec![0.0; n_control];
            let mut hits = 0;
            for _ in 0..n {
                a.iter_mut().for_each(|x| *x = effect + rng.sample::<f64, _>(StandardNormal));
                b.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
                if welch_t_test(&a, &b, Sides::Two).is_ok_and(|p| p <= level) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(hits as f64 / draws as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::beta_cdf;

    #[test]
    fn null_calibration() {
        for k in [3usize, 5, 10] {
            for r in 1..=k {
                let beta = PowerSpec::equal(k, r, k, 0.05, 0.5).beta().unwrap();
                let p = rop_power_equal(&PowerSpec::equal(k, r, k, 0.05, beta)).unwrap();
                assert!((p - 0.05).abs() < 1e-10, "k={k} r={r} p={p}");
            }
        }
    }

    #[test]
    fn certain_successes() {
        let spec = PowerSpec {
            k: 8,
            r: 3,
            r0: 3,
            alpha: 0.05,
            effect: Effect::Unequal { success_probs: vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0] },
        };
        assert_eq!(rop_power_poisson_binomial(&spec).unwrap(), 1.0);
    }

    #[test]
    fn poisson_binomial_reduces_to_binomial() {
        for r in 0..=7 {
            let dp = poisson_binomial_sf(&[0.3; 7], r);
            assert!((dp - binomial_sf(r as u64, 7, 0.3).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn equal_matches_dp() {
        for r0 in 0..=6 {
            for r in 1..=6 {
                let s = PowerSpec::equal(6, r, r0, 0.01, 0.7);
                let dp = poisson_binomial_sf(&s.success_probs().unwrap(), r);
                assert!((rop_power_equal(&s).unwrap() - dp).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn r0_below_r_with_certain_effect() {
        let s = PowerSpec::equal(10, 6, 5, 0.05, 1.0);
        let beta = s.beta().unwrap();
        assert!((beta_cdf(beta, 6.0, 5.0).unwrap() - 0.05).abs() < 1e-10);
        let want = binomial_sf(1, 5, beta).unwrap();
        assert!((rop_power_equal(&s).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn curves_have_expected_length() {
        assert_eq!(power_curve(10, Sweep::R { r0: 6 }, 0.05, 0.9).unwrap().len(), 10);
        assert_eq!(power_curve(10, Sweep::R0 { r: 6 }, 0.05, 0.9).unwrap().len(), 11);
    }

    #[test]
    fn vote_counting_examples() {
        let prop = VoteCriterion::Proportion { pi0: 0.5 };
        assert_eq!(prop.critical_count(10).unwrap(), 6);
        let mut last = 0.0;
        for k in [5, 10, 20, 50] {
            let p = vote_counting_power(k, 1.0, prop).unwrap();
            assert!(p >= last);
            last = p;
        }
        let lvl = VoteCriterion::NullLevel { alpha_vc: 0.05, level: 0.05 };
        for k in [5, 10, 50] {
            assert!(vote_counting_power(k, 0.05, lvl).unwrap() <= 0.05);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(PowerSpec::equal(5, 0, 1, 0.05, 0.5).validate().is_err());
        assert!(PowerSpec::equal(5, 2, 6, 0.05, 0.5).validate().is_err());
        assert!(PowerSpec::equal(5, 2, 1, 1.5, 0.5).validate().is_err());
        assert!(PowerSpec::equal(5, 2, 1, 0.05, -0.1).validate().is_err());
    }

    #[test]
    fn welch_power_null_and_large_effect() {
        let null = welch_power_mc(0.0, 10, 10, 0.05, 4000, 1).unwrap();
        assert!((null - 0.05).abs() < 0.015);
        let big = welch_power_mc(3.0, 10, 10, 0.05, 2000, 2).unwrap();
        assert!(big > 0.99);
    }
}
