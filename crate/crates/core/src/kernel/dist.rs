//! Distribution functions for the meta-analysis nulls.

use serde::{Deserialize, Serialize};

use super::special::{beta_inc_pair, gamma_q, ln_beta, ln_gamma};
use crate::error::{Error, Result};

/// Family of a [`DistributionQuery`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Beta,
    ChiSquare,
    StdNormal,
    Binomial,
}

/// A CDF evaluation request: `params` holds the shapes for Beta, the degrees
/// of freedom for ChiSquare, nothing for StdNormal and `(n, p)` for Binomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionQuery {
    pub family: Family,
    pub params: Vec<f64>,
    pub point: f64,
}

impl DistributionQuery {
    pub fn cdf(&self) -> Result<f64> {
        let want = match self.family {
            Family::Beta | Family::Binomial => 2,
            Family::ChiSquare => 1,
            Family::StdNormal => 0,
        };
        if self.params.len() != want {
            return Err(Error::Domain(format!(
                "{:?} takes {want} parameters, got {}",
                self.family,
                self.params.len()
            )));
        }
        match self.family {
            Family::Beta => beta_cdf(self.point.clamp(0.0, 1.0), self.params[0], self.params[1]),
            Family::ChiSquare => Ok(1.0 - chisq_sf(self.point.max(0.0), self.params[0])?),
            Family::StdNormal => Ok(std_normal_cdf(self.point)),
            Family::Binomial => {
                let n = self.params[0];
                if n < 0.0 || n.fract() != 0.0 {
                    return Err(Error::Domain(format!("binomial n must be a nonnegative integer, got {n}")));
                }
                if self.point < 0.0 {
                    return Ok(0.0);
                }
                let k = self.point.floor() as u64;
                if k >= n as u64 {
                    return Ok(1.0);
                }
                Ok(1.0 - binomial_sf(k + 1, n as u64, self.params[1])?)
            }
        }
    }
}

fn check_shapes(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("beta shapes must be positive, got ({a}, {b})")));
    }
    Ok(())
}

/// `I_x(a, b)`, the Beta(a, b) CDF.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("beta_cdf point {x} outside [0, 1]")));
    }
    Ok(beta_inc_pair(a, b, x, 1.0 - x))
}

pub fn beta_pdf(x: f64, a: f64, b: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("beta_pdf point {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        let edge_shape = if x == 0.0 { a } else { b };
        return Ok(match edge_shape {
            s if s < 1.0 => f64::INFINITY,
            1.0 => (-ln_beta(a, b)).exp(),
            _ => 0.0,
        });
    }
    Ok(((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)).exp())
}

/// Inverse of [`beta_cdf`]: safeguarded Newton iteration inside a shrinking
/// bisection bracket.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("beta_quantile probability {p} outside (0, 1)")));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = a / (a + b);
    for _ in 0..400 {
        let f = beta_inc_pair(a, b, x, 1.0 - x) - p;
        if f.abs() <= 1e-15 * p.min(1.0 - p).max(1e-300) {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = beta_pdf(x, a, b)?;
        let newton = x - f / dens;
        x = if dens.is_finite() && dens > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let resid = (beta_inc_pair(a, b, x, 1.0 - x) - p).abs();
    if resid > 1e-10 {
        return Err(Error::NonConvergence(format!(
            "beta_quantile({p}, {a}, {b}) residual {resid:e}"
        )));
    }
    Ok(x)
}

/// `P(X > x)` for a chi-square with `df` degrees of freedom.
pub fn chisq_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Domain(format!("chi-square df must be positive, got {df}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("chi-square point must be nonnegative, got {x}")));
    }
    Ok(gamma_q(0.5 * df, 0.5 * x))
}

/// Upper tail of N(0, 1), computed as `Q(1/2, z^2/2) / 2` so that both tails
/// stay accurate far from zero.
pub fn std_normal_sf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let half_tail = 0.5 * gamma_q(0.5, 0.5 * z * z);
    if z >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

pub fn std_normal_cdf(z: f64) -> f64 {
    std_normal_sf(-z)
}

/// Inverse CDF of N(0, 1) (Wichura's AS 241, PPND16).
#[allow(clippy::excessive_precision)]
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile probability {p} outside (0, 1)")));
    }
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        133.141_667_891_784_38,
        1_971.590_950_306_551_3,
        13_731.693_765_509_461,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_596,
        39_307.895_800_092_71,
        28_729.085_735_721_943,
        5_226.495_278_852_546,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_545,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_08,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_9,
        0.026_532_189_526_576_124,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_888,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_445_9e-7,
        2.044_263_103_389_939_7e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return Ok(q * poly(&A, r) / poly(&B, r));
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    Ok(if q < 0.0 { -val } else { val })
}

/// `P(T >= t)` for Student's t with `df` (possibly fractional) degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Domain(format!("t df must be positive, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::Domain("t statistic is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    let half_tail = 0.5 * beta_inc_pair(0.5 * df, 0.5, x, y);
    Ok(if t >= 0.0 { half_tail } else { 1.0 - half_tail })
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub fn binomial_pmf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if k > n {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if k == n { 1.0 } else { 0.0 });
    }
    Ok((ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp())
}

/// `P(X >= k)` for `X ~ BIN(n, p)`, by direct summation of the shorter tail.
pub fn binomial_sf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if k == 0 {
        return Ok(1.0);
    }
    if k > n {
        return Ok(0.0);
    }
    let mean = n as f64 * p;
    if (k as f64) > mean {
        let mut s = 0.0;
        for i in k..=n {
            s += binomial_pmf(i, n, p)?;
        }
        Ok(s.min(1.0))
    } else {
        let mut s = 0.0;
        for i in 0..k {
            s += binomial_pmf(i, n, p)?;
        }
        Ok((1.0 - s).clamp(0.0, 1.0))
    }
}

pub(crate) fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}
