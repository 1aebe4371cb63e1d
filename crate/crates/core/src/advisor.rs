//! Data-driven choice of r.
//!
//! Two diagnostics are provided:
//!
//! * the detrended count criterion: detections `N_r` at each r minus their
//!   mean under within-study shuffles of the p-values across genes;
//! * the pathway committee: KS enrichment of gene sets under rOP at each
//!   committee r, top pathways by rank sum, then sequential signed-rank tests
//!   that lower r from K while doing so makes enrichment significantly stronger.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::combine::{combine_matrix, MetaMethod};
use crate::error::{Error, Result};
use crate::kernel::{ks_two_sample, wilcoxon_signed_rank, Sides};
use crate::matrix::PValueMatrix;
use crate::significance::{bh_adjust, shuffle_pvalues, PermutationPlan, PermutationScope};

pub const DEFAULT_MIN_SET_SIZE: usize = 5;
pub const DEFAULT_MAX_SET_SIZE: usize = 500;
pub const DEFAULT_TOP_PATHWAYS: usize = 100;
/// Minimum number of usable gene sets for the committee.
pub const MIN_USABLE_PATHWAYS: usize = 5;
/// Level of each sequential signed-rank test.
pub const SEQUENTIAL_LEVEL: f64 = 0.05;
/// Share of the maximum adjusted count within which the largest r is preferred.
pub const COUNT_TIE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneSet {
    pub name: String,
    pub description: String,
    pub genes: Vec<String>,
    /// Member count as read, before intersection with the gene universe.
    pub original_size: usize,
}

impl GeneSet {
    pub fn size(&self) -> usize {
        self.genes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneSetCollection {
    pub sets: Vec<GeneSet>,
}

impl GeneSetCollection {
    pub fn new(sets: Vec<GeneSet>) -> Self {
        GeneSetCollection { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Keeps members in `universe` (deduplicated, order preserved) and drops
    /// sets whose restricted size falls outside `[min_size, max_size]`.
    pub fn restrict(&self, universe: &[String], min_size: usize, max_size: usize) -> GeneSetCollection {
        let universe: HashSet<&str> = universe.iter().map(String::as_str).collect();
        let sets = self
            .sets
            .iter()
            .filter_map(|s| {
                let mut seen = HashSet::new();
                let genes: Vec<String> = s
                    .genes
                    .iter()
                    .filter(|g| universe.contains(g.as_str()) && seen.insert(g.as_str()))
                    .cloned()
                    .collect();
                (!genes.is_empty() && genes.len() >= min_size && genes.len() <= max_size).then(|| GeneSet {
                    name: s.name.clone(),
                    description: s.description.clone(),
                    genes,
                    original_size: s.original_size,
                })
            })
            .collect();
        GeneSetCollection { sets }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub r: usize,
    pub n_r: usize,
    pub baseline_mean: f64,
    pub baseline_sd: f64,
    pub n_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDiagnostics {
    pub k: usize,
    pub records: Vec<CountRecord>,
    pub selected_r_counts: usize,
    pub fdr_threshold: f64,
    pub permutations: usize,
}

/// rOP meta p-values for every r = 1..K from one matrix, `out[r-1][g]`.
///
/// Uses `I_x(r, K - r + 1) = P(BIN(K, x) >= r)`, summed term by term.
fn rop_all_r(matrix: &PValueMatrix) -> Vec<Vec<f64>> {
    let k = matrix.n_studies();
    let g = matrix.n_genes();
    let mut out = vec![vec![0.0; g]; k];
    let mut row = vec![0.0; k];
    let mut binom = vec![1.0; k + 1];
    for i in 1..=k {
        binom[i] = binom[i - 1] * (k - i + 1) as f64 / i as f64;
    }
    for gi in 0..g {
        row.copy_from_slice(matrix.row(gi));
        row.sort_by(f64::total_cmp);
        for r in 1..=k {
            let x = row[r - 1];
            let p = if x <= 0.0 {
                0.0
            } else if x >= 1.0 {
                1.0
            } else {
                (r..=k).map(|i| binom[i] * x.powi(i as i32) * (1.0 - x).powi((k - i) as i32)).sum::<f64>()
            };
            out[r - 1][gi] = p.min(1.0);
        }
    }
    out
}

fn count_detected(pvals: &[f64], fdr: f64) -> usize {
    bh_adjust(pvals).iter().filter(|q| **q <= fdr).count()
}

/// Detections `N_r` per r for a matrix using the main combine + BH path.
pub fn detection_counts(matrix: &PValueMatrix, fdr: f64) -> Result<Vec<usize>> {
    (1..=matrix.n_studies())
        .into_par_iter()
        .map(|r| Ok(count_detected(&combine_matrix(matrix, &MetaMethod::Rop { r })?.meta_p(), fdr)))
        .collect()
}

/// Largest r whose adjusted count is within the tie tolerance of the maximum.
pub fn pick_r(n_prime: &[f64]) -> usize {
    let max = n_prime.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = max - COUNT_TIE_TOLERANCE * max.abs();
    n_prime.iter().rposition(|v| *v >= floor).map_or(1, |i| i + 1)
}

/// Detrended detection-count criterion.
pub fn select_r_by_count(matrix: &PValueMatrix, plan: &PermutationPlan, fdr: f64) -> Result<RDiagnostics> {
    plan.validate()?;
    if plan.scope != PermutationScope::PvaluesAcrossGenesWithinStudy {
        return Err(Error::Validation("count criterion needs a p-value shuffle plan".into()));
    }
    if !(fdr > 0.0 && fdr < 1.0) {
        return Err(Error::Validation(format!("FDR level {fdr} outside (0, 1)")));
    }
    let k = matrix.n_studies();
    let observed = detection_counts(matrix, fdr)?;
    let baseline: Vec<Vec<usize>> = (0..plan.b)
        .into_par_iter()
        .map(|b| {
            let shuffled = shuffle_pvalues(matrix, plan.seed, b);
            rop_all_r(&shuffled).iter().map(|p| count_detected(p, fdr)).collect()
        })
        .collect();
    let bf = plan.b as f64;
    let records: Vec<CountRecord> = (0..k)
        .map(|i| {
            let mean = baseline.iter().map(|c| c[i] as f64).sum::<f64>() / bf;
            let var = if plan.b > 1 {
                baseline.iter().map(|c| (c[i] as f64 - mean).powi(2)).sum::<f64>() / (bf - 1.0)
            } else {
                0.0
            };
            CountRecord {
                r: i + 1,
                n_r: observed[i],
                baseline_mean: mean,
                baseline_sd: var.sqrt(),
                n_prime: observed[i] as f64 - mean,
            }
        })
        .collect();
    let n_prime: Vec<f64> = records.iter().map(|r| r.n_prime).collect();
    Ok(RDiagnostics { k, records, selected_r_counts: pick_r(&n_prime), fdr_threshold: fdr, permutations: plan.b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialStep {
    /// Current r'.
    pub r_from: usize,
    /// Candidate r' - 1.
    pub r_to: usize,
    pub p_value: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayCommittee {
    pub k: usize,
    /// Committee r values, ascending: floor(K/2) + 1 ..= K.
    pub r_values: Vec<usize>,
    pub pathways: Vec<String>,
    /// `enrichment[i][m]`: KS p-value of pathway m under rOP(r_values[i]).
    pub enrichment: Vec<Vec<f64>>,
    /// Average ranks of `enrichment[i]` across pathways.
    pub ranks: Vec<Vec<f64>>,
    pub rank_sums: Vec<f64>,
    /// Indices into `pathways` of the top-U set, best first.
    pub top: Vec<usize>,
    pub steps: Vec<SequentialStep>,
    pub selected_r_pathways: usize,
}

impl PathwayCommittee {
    pub fn committee_index(&self, r: usize) -> Option<usize> {
        self.r_values.iter().position(|x| *x == r)
    }
}

/// Average ranks (1-based), ties share the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Pathway-association committee with sequential signed-rank tests.
///
/// `sides` is the alternative of each test on `p_{r'} - p_{r'-1}`; the
/// default `Right` asks whether lowering r makes enrichment p-values smaller.
pub fn select_r_by_pathway(
    matrix: &PValueMatrix,
    gene_sets: &GeneSetCollection,
    u: usize,
    sides: Sides,
) -> Result<PathwayCommittee> {
    let k = matrix.n_studies();
    if k < 3 {
        return Err(Error::Validation(format!("pathway committee needs K >= 3 studies, got {k}")));
    }
    if u == 0 {
        return Err(Error::Validation("U must be at least 1".into()));
    }
    let index: HashMap<&str, usize> = matrix.genes().iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let g = matrix.n_genes();
    let members: Vec<(usize, Vec<bool>)> = gene_sets
        .sets
        .iter()
        .enumerate()
        .filter_map(|(m, s)| {
            let mut mask = vec![false; g];
            let mut n = 0;
            for gene in &s.genes {
                if let Some(&i) = index.get(gene.as_str()) {
                    n += usize::from(!mask[i]);
                    mask[i] = true;
                }
            }
            (n > 0 && n < g).then_some((m, mask))
        })
        .collect();
    if members.len() < MIN_USABLE_PATHWAYS {
        return Err(Error::CommitteeTooSmall { usable: members.len(), required: MIN_USABLE_PATHWAYS });
    }
    let pathways: Vec<String> = members.iter().map(|(m, _)| gene_sets.sets[*m].name.clone()).collect();
    let r_values: Vec<usize> = (k / 2 + 1..=k).collect();

    let enrichment: Vec<Vec<f64>> = r_values
        .iter()
        .map(|&r| {
            let meta = combine_matrix(matrix, &MetaMethod::Rop { r })?.meta_p();
            members
                .par_iter()
                .map(|(_, mask)| {
                    let (inside, outside): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
                        meta.iter().copied().enumerate().partition(|(i, _)| mask[*i]);
                    let a: Vec<f64> = inside.into_iter().map(|(_, p)| p).collect();
                    let b: Vec<f64> = outside.into_iter().map(|(_, p)| p).collect();
                    Ok(ks_two_sample(&a, &b)?.p_value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let ranks: Vec<Vec<f64>> = enrichment.iter().map(|p| average_ranks(p)).collect();
    let n_path = pathways.len();
    let rank_sums: Vec<f64> = (0..n_path).map(|m| ranks.iter().map(|r| r[m]).sum()).collect();
    let mut top: Vec<usize> = (0..n_path).collect();
    top.sort_by(|&a, &b| rank_sums[a].total_cmp(&rank_sums[b]).then(a.cmp(&b)));
    top.truncate(u.min(n_path));

    let lower = r_values[0];
    let mut steps = Vec::new();
    let mut current = k;
    while current > lower {
        let hi = &enrichment[current - lower];
        let lo = &enrichment[current - 1 - lower];
        let a: Vec<f64> = top.iter().map(|&m| hi[m]).collect();
        let b: Vec<f64> = top.iter().map(|&m| lo[m]).collect();
        let p_value = match wilcoxon_signed_rank(&a, &b, sides) {
            Ok(o) => o.p_value,
            Err(Error::TooFewPairs { .. }) => 1.0,
            Err(e) => return Err(e),
        };
        let rejected = p_value < SEQUENTIAL_LEVEL;
        steps.push(SequentialStep { r_from: current, r_to: current - 1, p_value, rejected });
        if !rejected {
            break;
        }
        current -= 1;
    }

    Ok(PathwayCommittee {
        k,
        r_values,
        pathways,
        enrichment,
        ranks,
        rank_sums,
        top,
        steps,
        selected_r_pathways: current,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    /// Linear-interpolation quantiles of a nonempty sample.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        FiveNumber { min: v[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: v[v.len() - 1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentSummary {
    pub r: usize,
    /// Summary of `-log10 p` over the top pathways.
    pub neg_log10: FiveNumber,
    /// Sequential-test p-value of the step from this r to r - 1, if run.
    pub step_p_value: Option<f64>,
}

/// Plot-ready tables for both diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub counts: Vec<CountRecord>,
    pub selected_r_counts: usize,
    pub enrichment: Vec<EnrichmentSummary>,
    pub selected_r_pathways: Option<usize>,
}

pub fn diagnostics_report(counts: &RDiagnostics, committee: Option<&PathwayCommittee>) -> Result<DiagnosticsReport> {
    let enrichment = match committee {
        None => Vec::new(),
        Some(c) => {
            if c.k != counts.k {
                return Err(Error::Validation(format!(
                    "diagnostics come from different matrices: K = {} vs {}",
                    counts.k, c.k
                )));
            }
            c.r_values
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let vals: Vec<f64> = c.top.iter().map(|&m| -c.enrichment[i][m].max(1e-300).log10()).collect();
                    EnrichmentSummary {
                        r,
                        neg_log10: FiveNumber::of(&vals),
                        step_p_value: c.steps.iter().find(|s| s.r_from == r).map(|s| s.p_value),
                    }
                })
                .collect()
        }
    };
    Ok(DiagnosticsReport {
        counts: counts.records.clone(),
        selected_r_counts: counts.selected_r_counts,
        enrichment,
        selected_r_pathways: committee.map(|c| c.selected_r_pathways),
    })
}
