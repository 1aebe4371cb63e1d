//! Elementary two-sample and paired tests.

use serde::{Deserialize, Serialize};

use super::dist::{std_normal_cdf, std_normal_sf, student_t_sf};
use crate::error::{Error, Result};

/// Alternative hypothesis for a test. `Left` means the first sample tends to
/// be smaller than the second, `Right` that it tends to be larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sides {
    #[default]
    Two,
    Left,
    Right,
}

/// Welch statistic and both one-sided tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchOutcome {
    pub t: f64,
    pub df: f64,
    pub p_left: f64,
    pub p_right: f64,
}

impl WelchOutcome {
    pub fn p_value(&self, sides: Sides) -> f64 {
        match sides {
            Sides::Left => self.p_left,
            Sides::Right => self.p_right,
            Sides::Two => (2.0 * self.p_left.min(self.p_right)).min(1.0),
        }
    }
}

/// Summary sufficient for the Welch test: count, mean, unbiased variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMoments {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
}

impl GroupMoments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return GroupMoments { n, mean: f64::NAN, var: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            f64::NAN
        };
        GroupMoments { n, mean, var }
    }
}

pub fn welch_from_moments(a: GroupMoments, b: GroupMoments) -> Result<WelchOutcome> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::Degenerate(format!(
            "Welch test needs at least 2 observations per group, got {} and {}",
            a.n, b.n
        )));
    }
    let va = a.var / a.n as f64;
    let vb = b.var / b.n as f64;
    let se2 = va + vb;
    if !(se2 > 0.0) || !se2.is_finite() {
        return Err(Error::Degenerate("both groups are constant".into()));
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    // Each tail is computed directly from the smaller tail so the pair sums to one.
    let upper = student_t_sf(t.abs(), df)?;
    let (p_left, p_right) = if t >= 0.0 { (1.0 - upper, upper) } else { (upper, 1.0 - upper) };
    Ok(WelchOutcome { t, df, p_left, p_right })
}

pub fn welch_outcome(group_a: &[f64], group_b: &[f64]) -> Result<WelchOutcome> {
    welch_from_moments(GroupMoments::of(group_a), GroupMoments::of(group_b))
}

/// Welch unequal-variance t-test p-value.
pub fn welch_t_test(group_a: &[f64], group_b: &[f64], sides: Sides) -> Result<f64> {
    Ok(welch_outcome(group_a, group_b)?.p_value(sides))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub d: f64,
    pub p_value: f64,
    /// Whether the p-value came from the exact lattice-path count.
    pub exact: bool,
}

/// Above this `n * m` the asymptotic Kolmogorov distribution is used.
pub const KS_EXACT_MAX_PRODUCT: usize = 10_000;

/// Two-sample Kolmogorov-Smirnov test, two-sided.
///
/// Small samples (`n * m <= 10_000`) use the exact null of D by lattice-path
/// counting; larger ones use the asymptotic Kolmogorov distribution with
/// Stephens' effective-sample-size correction.
pub fn ks_two_sample(sample_a: &[f64], sample_b: &[f64]) -> Result<KsOutcome> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample_a.iter().chain(sample_b).any(|v| v.is_nan()) {
        return Err(Error::Domain("KS sample contains NaN".into()));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let n = a.len();
    let m = b.len();
    let d = ks_statistic_sorted(&a, &b);
    if n * m <= KS_EXACT_MAX_PRODUCT {
        return Ok(KsOutcome { d, p_value: ks_exact_sf(d, n, m), exact: true });
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    Ok(KsOutcome { d, p_value: kolmogorov_sf(lambda), exact: false })
}

/// D statistic from two sorted samples; ties advance both sides together.
pub(crate) fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0_f64;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * 2.0 * (a2 * kf * kf).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev.abs() || term.abs() <= 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term;
    }
    1.0
}

/// Exact `P(D >= d)` under the null for sample sizes `n`, `m` (no ties).
///
/// Walks the merged order of a uniformly random arrangement as a lattice path
/// and accumulates the probability of staying strictly inside the band.
fn ks_exact_sf(d: f64, n: usize, m: usize) -> f64 {
    // On the lattice D = |i m - j n| / (n m), so the band test is integral.
    let band = (d * (n * m) as f64 - 1e-7).ceil().max(0.0) as i64;
    if band <= 0 {
        return 1.0;
    }
    let inside = |i: usize, j: usize| ((i * m) as i64 - (j * n) as i64).abs() < band;
    // prob[j] holds the probability mass at (i, j) for the current i.
    let mut prob = vec![0.0_f64; m + 1];
    prob[0] = 1.0;
    for i in 0..=n {
        // Moves along j within row i.
        for j in 0..=m {
            if !inside(i, j) {
                prob[j] = 0.0;
                continue;
            }
            if j < m {
                let remaining = (n - i + m - j) as f64;
                let step = prob[j] * (m - j) as f64 / remaining;
                prob[j + 1] += step;
            }
        }
        if i == n {
            break;
        }
        // Moves from row i to row i + 1: only the "a" share carries over.
        for j in 0..=m {
            let remaining = (n - i + m - j) as f64;
            prob[j] *= (n - i) as f64 / remaining;
        }
    }
    (1.0 - prob[m]).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRankOutcome {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    pub n_nonzero: usize,
    pub p_value: f64,
    /// Set when every difference was zero; `p_value` is then 1.
    pub no_nonzero_pairs: bool,
    pub exact: bool,
}

pub const WILCOXON_MIN_PAIRS: usize = 5;
/// Below this many nonzero, untied differences the exact null is used.
pub const WILCOXON_EXACT_MAX: usize = 50;

/// Wilcoxon signed-rank test on `paired_a - paired_b`; `Right` is the
/// alternative that `paired_a` tends to exceed `paired_b`.
///
/// Zero differences are dropped. With fewer than 50 nonzero differences and
/// no tied magnitudes the exact permutation null is used, otherwise the
/// normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(
    paired_a: &[f64],
    paired_b: &[f64],
    sides: Sides,
) -> Result<SignedRankOutcome> {
    if paired_a.len() != paired_b.len() {
        return Err(Error::Validation(format!(
            "paired samples differ in length: {} vs {}",
            paired_a.len(),
            paired_b.len()
        )));
    }
    let diffs: Vec<f64> = paired_a
        .iter()
        .zip(paired_b)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::Domain("paired samples contain NaN".into()));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(SignedRankOutcome {
            w_plus: 0.0,
            n_nonzero: 0,
            p_value: 1.0,
            no_nonzero_pairs: true,
            exact: false,
        });
    }
    if n < WILCOXON_MIN_PAIRS {
        return Err(Error::TooFewPairs { nonzero: n, required: WILCOXON_MIN_PAIRS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && diffs[order[j]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    if tie_term == 0.0 && n < WILCOXON_EXACT_MAX {
        let p = exact_signed_rank_p(w_plus.round() as usize, n, sides);
        return Ok(SignedRankOutcome { w_plus, n_nonzero: n, p_value: p, no_nonzero_pairs: false, exact: true });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let sd = var.sqrt();
    let upper = std_normal_sf((w_plus - mean - 0.5) / sd);
    let lower = std_normal_cdf((w_plus - mean + 0.5) / sd);
    let p = match sides {
        Sides::Right => upper,
        Sides::Left => lower,
        Sides::Two => (2.0 * upper.min(lower)).min(1.0),
    };
    Ok(SignedRankOutcome { w_plus, n_nonzero: n, p_value: p, no_nonzero_pairs: false, exact: false })
}

/// Exact signed-rank null via the subset-sum count of {1..n}.
fn exact_signed_rank_p(w: usize, n: usize, sides: Sides) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0.0_f64; max + 1];
    counts[0] = 1.0;
    for k in 1..=n {
        for s in (k..=max).rev() {
            counts[s] += counts[s - k];
        }
    }
    let total = 2.0_f64.powi(n as i32);
    let upper: f64 = counts[w.min(max)..].iter().sum::<f64>() / total;
    let lower: f64 = counts[..=w.min(max)].iter().sum::<f64>() / total;
    match sides {
        Sides::Right => upper,
        Sides::Left => lower,
        Sides::Two => (2.0 * upper.min(lower)).min(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_identical_groups() {
        let a = [1.0, 2.0, 3.0, 4.5];
        let p = welch_t_test(&a, &a, Sides::Two).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_tail_antisymmetry() {
        let a = [0.3, 1.2, 2.2, 0.9, 1.7];
        let b = [-0.4, 0.1, 0.8, -1.0, 0.2, 0.5];
        let ab = welch_outcome(&a, &b).unwrap();
        let ba = welch_outcome(&b, &a).unwrap();
        assert!((ab.p_left - ba.p_right).abs() < 1e-15);
        assert!((ab.p_right - ba.p_left).abs() < 1e-15);
        assert!((ab.p_left + ab.p_right - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_degenerate_inputs() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0], Sides::Two).is_err());
        assert!(welch_t_test(&[2.0, 2.0], &[1.0, 1.0, 1.0], Sides::Two).is_err());
    }

    #[test]
    fn ks_identical_samples() {
        let a = [0.1, 0.4, 0.2, 0.9];
        let out = ks_two_sample(&a, &a).unwrap();
        assert_eq!(out.d, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn kolmogorov_sf_reference() {
        // Classical 5% critical value of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.358_098_8) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn wilcoxon_all_zero_differences_flagged() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let out = wilcoxon_signed_rank(&a, &a, Sides::Right).unwrap();
        assert!(out.no_nonzero_pairs);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_too_few_pairs() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.5, 2.0, 3.0, 4.0, 5.5];
        assert!(matches!(
            wilcoxon_signed_rank(&a, &b, Sides::Two),
            Err(Error::TooFewPairs { nonzero: 2, .. })
        ));
    }

    #[test]
    fn wilcoxon_reversal_mirrors_tails() {
        let a = [1.3, 2.1, 0.2, 4.4, 5.0, 2.2, 0.7, 3.3, 1.9, 2.8, 0.4, 1.1];
        let b = [1.0, 2.5, 0.1, 3.9, 5.7, 1.2, 0.75, 3.0, 1.0, 2.0, 0.9, 0.6];
        let r = wilcoxon_signed_rank(&a, &b, Sides::Right).unwrap().p_value;
        let l = wilcoxon_signed_rank(&b, &a, Sides::Left).unwrap().p_value;
        assert!((r - l).abs() < 1e-15);
    }
}
