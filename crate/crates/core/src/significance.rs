//! Multiple-testing control: BH and BY adjustment, and the pooled
//! label-permutation null with its q-value estimator.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::{combine_matrix, MetaMethod, MetaResult, Orientation};
use crate::error::{Error, Result};
use crate::matrix::PValueMatrix;
use crate::rng::{substream, Domain};
use crate::study::{DeMode, StudySet};

/// Permutations for the label-permutation null.
pub const DEFAULT_LABEL_PERMUTATIONS: usize = 500;
/// Permutations for the r-selection baseline.
pub const DEFAULT_SHUFFLE_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationScope {
    /// Shuffle class labels within each study and redo the DE tests.
    ClassLabelsWithinStudy,
    /// Shuffle each study's p-value column across genes.
    PvaluesAcrossGenesWithinStudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub b: usize,
    pub seed: u64,
    pub scope: PermutationScope,
}

impl PermutationPlan {
    pub fn new(b: usize, seed: u64, scope: PermutationScope) -> Result<Self> {
        let plan = PermutationPlan { b, seed, scope };
        plan.validate()?;
        Ok(plan)
    }

    pub fn labels(seed: u64) -> Self {
        PermutationPlan { b: DEFAULT_LABEL_PERMUTATIONS, seed, scope: PermutationScope::ClassLabelsWithinStudy }
    }

    pub fn shuffles(seed: u64) -> Self {
        PermutationPlan {
            b: DEFAULT_SHUFFLE_PERMUTATIONS,
            seed,
            scope: PermutationScope::PvaluesAcrossGenesWithinStudy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::Validation("permutation count B must be at least 1".into()));
        }
        Ok(())
    }

    fn require(&self, scope: PermutationScope) -> Result<()> {
        self.validate()?;
        if self.scope != scope {
            return Err(Error::Validation(format!(
                "permutation plan scope {:?} cannot be used for {:?}",
                self.scope, scope
            )));
        }
        Ok(())
    }
}

/// Null statistics from `b` permutations of all `g` genes.
#[derive(Debug, Clone, PartialEq)]
pub struct NullPool {
    /// Permutation-major: `values[b * n_genes + g]`.
    values: Vec<f64>,
    n_genes: usize,
    n_perm: usize,
    orientation: Orientation,
}

impl NullPool {
    pub fn new(values: Vec<f64>, n_genes: usize, n_perm: usize, orientation: Orientation) -> Result<Self> {
        if values.is_empty() || n_genes == 0 || n_perm == 0 {
            return Err(Error::Validation("empty null pool".into()));
        }
        if values.len() != n_genes * n_perm {
            return Err(Error::Validation(format!(
                "null pool has {} values, expected {n_genes} x {n_perm}",
                values.len()
            )));
        }
        Ok(NullPool { values, n_genes, n_perm, orientation })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn permutation(&self, b: usize) -> &[f64] {
        &self.values[b * self.n_genes..(b + 1) * self.n_genes]
    }

    pub fn n_genes(&self) -> usize {
        self.n_genes
    }

    pub fn n_perm(&self) -> usize {
        self.n_perm
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
}

/// Benjamini-Hochberg step-up q-values, in input order.
pub fn bh_adjust(pvals: &[f64]) -> Vec<f64> {
    step_up(pvals, 1.0)
}

/// Benjamini-Yekutieli q-values: BH inflated by `sum_{i<=G} 1/i`.
pub fn by_adjust(pvals: &[f64]) -> Vec<f64> {
    let c: f64 = (1..=pvals.len()).map(|i| 1.0 / i as f64).sum();
    step_up(pvals, c)
}

fn step_up(pvals: &[f64], factor: f64) -> Vec<f64> {
    let n = pvals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut q = vec![0.0; n];
    let mut running = f64::INFINITY;
    for (rank, &i) in order.iter().enumerate().rev() {
        let v = factor * n as f64 * pvals[i] / (rank + 1) as f64;
        running = running.min(v);
        q[i] = running.min(1.0);
    }
    q
}

/// Label permutations for one draw `b`: each study's labels shuffled by its
/// own substream.
fn permuted_labels(studies: &StudySet, seed: u64, b: usize) -> Vec<Vec<bool>> {
    studies
        .studies()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut l = s.labels().to_vec();
            l.shuffle(&mut substream(seed, Domain::LabelPermutation, b as u64, k as u64));
            l
        })
        .collect()
}

/// Null statistics from `plan.b` label permutations: labels are shuffled
/// within each study, the DE tests are redone and the genes recombined.
pub fn permute_labels(studies: &StudySet, plan: &PermutationPlan, mode: DeMode, method: &MetaMethod) -> Result<NullPool> {
    plan.require(PermutationScope::ClassLabelsWithinStudy)?;
    method.validate(studies.n_studies())?;
    let per_perm = (0..plan.b)
        .into_par_iter()
        .map(|b| {
            let labels = permuted_labels(studies, plan.seed, b);
            let m = studies.de_matrix_with_labels(&labels, mode)?;
            Ok(combine_matrix(&m, method)?.statistics())
        })
        .collect::<Result<Vec<_>>>()?;
    NullPool::new(per_perm.concat(), studies.n_genes(), plan.b, method.orientation())
}

/// Matrix with each study's column independently shuffled across genes.
pub fn shuffle_pvalues(matrix: &PValueMatrix, seed: u64, b: usize) -> PValueMatrix {
    let (g, k) = (matrix.n_genes(), matrix.n_studies());
    let two = matrix.to_two_sided();
    let mut values = vec![0.0; g * k];
    for j in 0..k {
        let mut col = two.column(j);
        col.shuffle(&mut substream(seed, Domain::PValueShuffle, b as u64, j as u64));
        for (i, v) in col.into_iter().enumerate() {
            values[i * k + j] = v;
        }
    }
    two.with_values(values)
}

/// Pooled permutation p-values and q-values for observed statistics.
///
/// `meta_p_g = (1 + #{null at least as extreme}) / (1 + G B)`; the q-value at
/// gene g is the mean null exceedance count per permutation divided by the
/// observed count at the same threshold, made monotone and clipped to 1.
pub fn pool_pvalues(observed: &[f64], pool: &NullPool) -> Result<(Vec<f64>, Vec<f64>)> {
    if observed.is_empty() {
        return Err(Error::Validation("no observed statistics".into()));
    }
    if observed.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("observed statistic is NaN".into()));
    }
    // Map to a "smaller is more extreme" scale.
    let flip = |x: f64| match pool.orientation {
        Orientation::SmallIsSignificant => x,
        Orientation::LargeIsSignificant => -x,
    };
    let mut null: Vec<f64> = pool.values.iter().map(|&x| flip(x)).collect();
    null.sort_by(f64::total_cmp);
    let obs: Vec<f64> = observed.iter().map(|&x| flip(x)).collect();
    let mut obs_sorted = obs.clone();
    obs_sorted.sort_by(f64::total_cmp);

    let total = null.len() as f64;
    let b = pool.n_perm as f64;
    let n = obs.len();
    let mut meta_p = vec![0.0; n];
    let mut raw_q = vec![0.0; n];
    for (i, &x) in obs.iter().enumerate() {
        let null_count = null.partition_point(|v| *v <= x) as f64;
        let obs_count = obs_sorted.partition_point(|v| *v <= x) as f64;
        meta_p[i] = (1.0 + null_count) / (1.0 + total);
        raw_q[i] = (null_count / b / obs_count).min(1.0);
    }
    // Monotone: the q-value of a gene cannot exceed that of any less extreme gene.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| obs[a].total_cmp(&obs[c]));
    let mut q = raw_q.clone();
    let mut running = f64::INFINITY;
    for &i in order.iter().rev() {
        running = running.min(raw_q[i]);
        q[i] = running;
    }
    // Tied statistics share the smallest value in their tie block.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && obs[order[end]] == obs[order[start]] {
            end += 1;
        }
        let m = order[start..end].iter().map(|&i| q[i]).fold(f64::INFINITY, f64::min);
        for &i in &order[start..end] {
            q[i] = m;
        }
        start = end;
    }
    Ok((meta_p, q))
}

/// How meta p-values and q-values are assigned after combination.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum Inference {
    /// Parametric meta p-values, BH q-values.
    #[default]
    ParametricBh,
    /// Parametric meta p-values, BY q-values.
    ParametricBy,
    /// Pooled label-permutation meta p-values and q-values.
    Permutation { plan: PermutationPlan },
}

/// Fills in q-values (and, for permutation inference, replaces meta p-values).
///
/// Permutation inference needs the expression data behind the matrix.
pub fn assess(result: &mut MetaResult, inference: &Inference, studies: Option<(&StudySet, DeMode)>) -> Result<()> {
    match inference {
        Inference::ParametricBh | Inference::ParametricBy => {
            let p = result.meta_p();
            let q = if matches!(inference, Inference::ParametricBh) { bh_adjust(&p) } else { by_adjust(&p) };
            for (rec, q) in result.records.iter_mut().zip(q) {
                rec.q_value = Some(q);
            }
        }
        Inference::Permutation { plan } => {
            let (set, mode) = studies.ok_or_else(|| {
                Error::Validation("permutation inference needs expression data, not precomputed p-values".into())
            })?;
            let pool = permute_labels(set, plan, mode, &result.method)?;
            let (p, q) = pool_pvalues(&result.statistics(), &pool)?;
            for ((rec, p), q) in result.records.iter_mut().zip(p).zip(q) {
                rec.meta_p = p;
                rec.q_value = Some(q);
            }
        }
    }
    Ok(())
}
