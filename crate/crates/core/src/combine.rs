//! Per-gene combination of study p-values.
//!
//! Every combiner maps a gene's K p-values to a statistic and a parametric
//! meta p-value under independent Uniform(0, 1) study p-values:
//!
//! | method | statistic | null |
//! |---|---|---|
//! | rOP(r) | r-th smallest p | Beta(r, K - r + 1) |
//! | Fisher | -2 sum ln p | chi-square, 2K df |
//! | Stouffer | sum Phi^-1(1 - p) / sqrt K | N(0, 1) |
//! | minP / maxP | min / max p | Beta(1, K) / Beta(K, 1) |
//! | vote counting | #{p < alpha} | BIN(K, alpha) |

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{beta_cdf, binomial_sf, chisq_sf, std_normal_quantile, std_normal_sf};
use crate::matrix::PValueMatrix;

/// Floor applied before log and normal-quantile transforms.
pub const P_FLOOR: f64 = 1e-300;
/// Ceiling applied before the normal-quantile transform.
pub const P_CEIL: f64 = 1.0 - 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// meta p = P(BIN(K, alpha) >= count).
    #[default]
    Exceedance,
    /// As `Exceedance`, but a gene can only be significant when the share of
    /// significant studies exceeds `pi0`; otherwise meta p = 1.
    MajorityGated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MetaMethod {
    Rop { r: usize },
    RopOneSided { r: usize },
    Fisher,
    Stouffer,
    #[serde(rename = "minp")]
    MinP,
    #[serde(rename = "maxp")]
    MaxP,
    VoteCount {
        alpha: f64,
        #[serde(default = "default_pi0")]
        pi0: f64,
        #[serde(default)]
        mode: VoteMode,
    },
}

fn default_pi0() -> f64 {
    0.5
}

/// Which end of the statistic's range is evidence against the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    SmallIsSignificant,
    LargeIsSignificant,
}

impl MetaMethod {
    pub fn orientation(&self) -> Orientation {
        match self {
            MetaMethod::Rop { .. } | MetaMethod::RopOneSided { .. } | MetaMethod::MinP | MetaMethod::MaxP => {
                Orientation::SmallIsSignificant
            }
            MetaMethod::Fisher | MetaMethod::Stouffer | MetaMethod::VoteCount { .. } => {
                Orientation::LargeIsSignificant
            }
        }
    }

    pub fn r(&self) -> Option<usize> {
        match self {
            MetaMethod::Rop { r } | MetaMethod::RopOneSided { r } => Some(*r),
            _ => None,
        }
    }

    /// Short label used in reports, e.g. `rop(r=6)`.
    pub fn label(&self) -> String {
        match self {
            MetaMethod::Rop { r } => format!("rop(r={r})"),
            MetaMethod::RopOneSided { r } => format!("rop_one_sided(r={r})"),
            MetaMethod::Fisher => "fisher".into(),
            MetaMethod::Stouffer => "stouffer".into(),
            MetaMethod::MinP => "minp".into(),
            MetaMethod::MaxP => "maxp".into(),
            MetaMethod::VoteCount { alpha, pi0, mode } => match mode {
                VoteMode::Exceedance => format!("vote_count(alpha={alpha})"),
                VoteMode::MajorityGated => format!("vote_count(alpha={alpha},pi0={pi0})"),
            },
        }
    }

    /// Checks parameters against the number of studies.
    pub fn validate(&self, k: usize) -> Result<()> {
        match *self {
            MetaMethod::Rop { r } | MetaMethod::RopOneSided { r } => check_r(r, k),
            MetaMethod::VoteCount { alpha, pi0, .. } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::Validation(format!("vote-counting alpha {alpha} outside (0, 1)")));
                }
                if !(0.0..=1.0).contains(&pi0) {
                    return Err(Error::Validation(format!("vote-counting pi0 {pi0} outside [0, 1]")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Statistic and parametric meta p-value of one gene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combined {
    pub statistic: f64,
    pub meta_p: f64,
}

fn check_r(r: usize, k: usize) -> Result<()> {
    if r == 0 || r > k {
        return Err(Error::ROutOfRange { r, k });
    }
    Ok(())
}

fn check_pvals(pvals: &[f64]) -> Result<()> {
    if pvals.is_empty() {
        return Err(Error::Validation("no p-values to combine".into()));
    }
    if let Some(bad) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("p-value {bad} outside [0, 1]")));
    }
    Ok(())
}

/// r-th smallest value (1-based `r`).
pub fn order_statistic(pvals: &[f64], r: usize) -> f64 {
    let mut v = pvals.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(r - 1, f64::total_cmp);
    *nth
}

pub fn combine_rop(pvals: &[f64], r: usize) -> Result<Combined> {
    check_pvals(pvals)?;
    let k = pvals.len();
    check_r(r, k)?;
    let statistic = order_statistic(pvals, r);
    Ok(Combined { statistic, meta_p: beta_cdf(statistic, r as f64, (k - r + 1) as f64)? })
}

pub fn combine_fisher(pvals: &[f64]) -> Result<Combined> {
    check_pvals(pvals)?;
    let statistic: f64 = -2.0 * pvals.iter().map(|p| p.max(P_FLOOR).ln()).sum::<f64>();
    Ok(Combined { statistic, meta_p: chisq_sf(statistic, 2.0 * pvals.len() as f64)? })
}

pub fn combine_stouffer(pvals: &[f64]) -> Result<Combined> {
    check_pvals(pvals)?;
    let mut sum = 0.0;
    for p in pvals {
        // Phi^-1(1 - p) = -Phi^-1(p), which keeps precision for tiny p.
        sum -= std_normal_quantile(p.clamp(P_FLOOR, P_CEIL))?;
    }
    let statistic = sum / (pvals.len() as f64).sqrt();
    Ok(Combined { statistic, meta_p: std_normal_sf(statistic) })
}

pub fn combine_minp(pvals: &[f64]) -> Result<Combined> {
    check_pvals(pvals)?;
    let statistic = pvals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Combined { statistic, meta_p: beta_cdf(statistic, 1.0, pvals.len() as f64)? })
}

pub fn combine_maxp(pvals: &[f64]) -> Result<Combined> {
    check_pvals(pvals)?;
    let statistic = pvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Combined { statistic, meta_p: beta_cdf(statistic, pvals.len() as f64, 1.0)? })
}

/// One-sided corrected rOP: `S = min(p_left_(r), p_right_(r))` with the
/// parametric p-value `min(1, 2 I_S(r, K - r + 1))`.
///
/// For `r > K/2` the two order statistics cannot both fall below 1/2, so the
/// doubled tail is exact whenever `S < 1/2` and conservative above.
pub fn combine_rop_one_sided(p_left: &[f64], p_right: &[f64], r: usize) -> Result<Combined> {
    Ok(one_sided_with_tail(p_left, p_right, r)?.0)
}

/// Returns the combination and whether the right tail produced the minimum.
fn one_sided_with_tail(p_left: &[f64], p_right: &[f64], r: usize) -> Result<(Combined, bool)> {
    check_pvals(p_left)?;
    check_pvals(p_right)?;
    if p_left.len() != p_right.len() {
        return Err(Error::Validation(format!(
            "one-sided vectors differ in length: {} vs {}",
            p_left.len(),
            p_right.len()
        )));
    }
    for (study, (l, rt)) in p_left.iter().zip(p_right).enumerate() {
        if (l + rt - 1.0).abs() > crate::matrix::PAIR_TOLERANCE {
            return Err(Error::Unpaired { study: study + 1, sum: l + rt });
        }
    }
    let k = p_left.len();
    check_r(r, k)?;
    let left = order_statistic(p_left, r);
    let right = order_statistic(p_right, r);
    let use_right = right < left;
    let statistic = left.min(right);
    let tail = beta_cdf(statistic, r as f64, (k - r + 1) as f64)?;
    Ok((Combined { statistic, meta_p: (2.0 * tail).min(1.0) }, use_right))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteOutcome {
    pub count: usize,
    pub meta_p: f64,
}

/// Count of studies with `p < alpha` and its binomial exceedance p-value.
pub fn vote_count(pvals: &[f64], alpha: f64, pi0: f64, mode: VoteMode) -> Result<VoteOutcome> {
    check_pvals(pvals)?;
    MetaMethod::VoteCount { alpha, pi0, mode }.validate(pvals.len())?;
    let k = pvals.len();
    let count = pvals.iter().filter(|p| **p < alpha).count();
    let gated = mode == VoteMode::MajorityGated && (count as f64) <= pi0 * k as f64;
    let meta_p = if gated { 1.0 } else { binomial_sf(count as u64, k as u64, alpha)? };
    Ok(VoteOutcome { count, meta_p })
}

/// Marks the `r` smallest p-values; ties go to the lower study index.
pub fn effective_mask(pvals: &[f64], r: usize) -> Result<Vec<bool>> {
    check_r(r, pvals.len())?;
    let mut order: Vec<usize> = (0..pvals.len()).collect();
    // Stable sort keeps study order among equal p-values.
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut mask = vec![false; pvals.len()];
    for &i in &order[..r] {
        mask[i] = true;
    }
    Ok(mask)
}

/// Combination of a single gene. `right` is required for one-sided rOP.
pub fn combine_row(method: &MetaMethod, row: &[f64], right: Option<&[f64]>) -> Result<(Combined, Option<Vec<bool>>)> {
    match *method {
        MetaMethod::Rop { r } => Ok((combine_rop(row, r)?, Some(effective_mask(row, r)?))),
        MetaMethod::RopOneSided { r } => {
            let right = right.ok_or_else(|| {
                Error::Validation("one-sided rOP needs paired left/right p-values".into())
            })?;
            let (c, use_right) = one_sided_with_tail(row, right, r)?;
            let mask = effective_mask(if use_right { right } else { row }, r)?;
            Ok((c, Some(mask)))
        }
        MetaMethod::Fisher => Ok((combine_fisher(row)?, None)),
        MetaMethod::Stouffer => Ok((combine_stouffer(row)?, None)),
        MetaMethod::MinP => Ok((combine_minp(row)?, None)),
        MetaMethod::MaxP => Ok((combine_maxp(row)?, None)),
        MetaMethod::VoteCount { alpha, pi0, mode } => {
            let v = vote_count(row, alpha, pi0, mode)?;
            Ok((Combined { statistic: v.count as f64, meta_p: v.meta_p }, None))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneRecord {
    pub gene: String,
    pub statistic: f64,
    pub meta_p: f64,
    /// Filled in by [`crate::significance`].
    pub q_value: Option<f64>,
    pub effective_mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub method: MetaMethod,
    pub studies: Vec<String>,
    pub records: Vec<GeneRecord>,
}

impl MetaResult {
    pub fn statistics(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.statistic).collect()
    }

    pub fn meta_p(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.meta_p).collect()
    }

    pub fn q_values(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.q_value).collect()
    }

    /// Indices of genes with `q <= level`; empty before q-values are assigned.
    pub fn detected(&self, level: f64) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.q_value.is_some_and(|q| q <= level))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Row-wise combination of a whole matrix, in parallel over genes.
///
/// Two-sided methods applied to a paired one-sided matrix use the derived
/// two-sided p-values `2 min(left, right)`.
pub fn combine_matrix(matrix: &PValueMatrix, method: &MetaMethod) -> Result<MetaResult> {
    method.validate(matrix.n_studies())?;
    let derived;
    let source = match method {
        MetaMethod::RopOneSided { .. } => {
            if !matrix.is_one_sided() {
                return Err(Error::Validation("one-sided rOP needs a one-sided paired p-value matrix".into()));
            }
            matrix
        }
        _ if matrix.is_one_sided() => {
            derived = matrix.to_two_sided();
            &derived
        }
        _ => matrix,
    };
    let records = (0..source.n_genes())
        .into_par_iter()
        .map(|g| {
            let gene = &source.genes()[g];
            let (c, mask) =
                combine_row(method, source.row(g), source.right_row(g)).map_err(|e| e.for_gene(gene))?;
            Ok(GeneRecord {
                gene: gene.clone(),
                statistic: c.statistic,
                meta_p: c.meta_p,
                q_value: None,
                effective_mask: mask,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaResult { method: *method, studies: source.studies().to_vec(), records })
}
