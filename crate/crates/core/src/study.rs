//! Per-study expression data and per-gene differential expression tests.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::kernel::hypothesis::{welch_from_moments, GroupMoments};
use crate::matrix::PValueMatrix;

/// Which p-values the DE step produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeMode {
    #[default]
    TwoSided,
    /// Left (down in cases) and right (up in cases) tails.
    OneSidedPair,
}

/// One study: a genes x samples expression matrix and binary class labels
/// (`true` = case, `false` = control).
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    id: String,
    genes: Vec<String>,
    samples: Vec<String>,
    /// Row-major, one row per gene.
    expr: Vec<f64>,
    labels: Vec<bool>,
}

impl Study {
    pub fn new(
        id: impl Into<String>,
        genes: Vec<String>,
        samples: Vec<String>,
        expr: Vec<f64>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        let id = id.into();
        if genes.is_empty() || samples.is_empty() {
            return Err(Error::Validation(format!("study {id} has no genes or no samples")));
        }
        if expr.len() != genes.len() * samples.len() {
            return Err(Error::Validation(format!(
                "study {id}: {} values for {} genes x {} samples",
                expr.len(),
                genes.len(),
                samples.len()
            )));
        }
        if labels.len() != samples.len() {
            return Err(Error::Validation(format!(
                "study {id}: {} labels for {} samples",
                labels.len(),
                samples.len()
            )));
        }
        let cases = labels.iter().filter(|l| **l).count();
        let controls = labels.len() - cases;
        if cases < 2 || controls < 2 {
            return Err(Error::Validation(format!(
                "study {id} needs at least 2 samples per class, got {cases} cases and {controls} controls"
            )));
        }
        if let Some(pos) = expr.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "study {id}: non-finite expression for gene {} sample {}",
                genes[pos / samples.len()],
                samples[pos % samples.len()]
            )));
        }
        let mut seen = HashSet::with_capacity(genes.len());
        for g in &genes {
            if !seen.insert(g.as_str()) {
                return Err(Error::Validation(format!("study {id}: duplicate gene id {g}")));
            }
        }
        Ok(Study { id, genes, samples, expr, labels })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn expression_row(&self, g: usize) -> &[f64] {
        let n = self.n_samples();
        &self.expr[g * n..(g + 1) * n]
    }

    /// Restricts and reorders genes to `universe`, which must be a subset.
    fn restrict(&self, universe: &[String]) -> Study {
        let index: HashMap<&str, usize> = self.genes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
        let mut expr = Vec::with_capacity(universe.len() * self.n_samples());
        for g in universe {
            expr.extend_from_slice(self.expression_row(index[g.as_str()]));
        }
        Study {
            id: self.id.clone(),
            genes: universe.to_vec(),
            samples: self.samples.clone(),
            expr,
            labels: self.labels.clone(),
        }
    }

    /// Welch test of cases vs controls for every gene under `labels`.
    ///
    /// Returns `(left, right)` tails; `left` is small when expression is lower
    /// in cases. A gene that is constant in both groups gets `(0.5, 0.5)`.
    pub fn welch_tails(&self, labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let mut left = Vec::with_capacity(self.n_genes());
        let mut right = Vec::with_capacity(self.n_genes());
        for g in 0..self.n_genes() {
            let (a, b) = split_moments(self.expression_row(g), labels);
            match welch_from_moments(a, b) {
                Ok(w) => {
                    left.push(w.p_left);
                    right.push(w.p_right);
                }
                Err(_) => {
                    left.push(0.5);
                    right.push(0.5);
                }
            }
        }
        (left, right)
    }

    fn degenerate_genes(&self) -> usize {
        (0..self.n_genes())
            .filter(|&g| {
                let (a, b) = split_moments(self.expression_row(g), &self.labels);
                welch_from_moments(a, b).is_err()
            })
            .count()
    }
}

/// Moments of the case group and the control group of one gene.
fn split_moments(row: &[f64], labels: &[bool]) -> (GroupMoments, GroupMoments) {
    // Two-pass moments per group, without allocating.
    let (mut na, mut sa, mut nb, mut sb) = (0usize, 0.0, 0usize, 0.0);
    for (x, &l) in row.iter().zip(labels) {
        if l {
            na += 1;
            sa += x;
        } else {
            nb += 1;
            sb += x;
        }
    }
    let ma = sa / na as f64;
    let mb = sb / nb as f64;
    let (mut qa, mut qb) = (0.0, 0.0);
    for (x, &l) in row.iter().zip(labels) {
        if l {
            qa += (x - ma) * (x - ma);
        } else {
            qb += (x - mb) * (x - mb);
        }
    }
    (
        GroupMoments { n: na, mean: ma, var: qa / (na.max(2) - 1) as f64 },
        GroupMoments { n: nb, mean: mb, var: qb / (nb.max(2) - 1) as f64 },
    )
}

/// Studies aligned to a common gene universe.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySet {
    genes: Vec<String>,
    studies: Vec<Study>,
}

impl StudySet {
    /// Intersects gene ids across studies, keeping the first study's order.
    pub fn new(studies: Vec<Study>) -> Result<Self> {
        let first = studies.first().ok_or_else(|| Error::Validation("no studies supplied".into()))?;
        let mut ids = HashSet::new();
        for s in &studies {
            if !ids.insert(s.id()) {
                return Err(Error::Validation(format!("duplicate study id {}", s.id())));
            }
        }
        let others: Vec<HashSet<&str>> =
            studies[1..].iter().map(|s| s.genes.iter().map(String::as_str).collect()).collect();
        let genes: Vec<String> =
            first.genes.iter().filter(|g| others.iter().all(|o| o.contains(g.as_str()))).cloned().collect();
        if genes.is_empty() {
            return Err(Error::Validation("studies share no gene ids".into()));
        }
        for s in &studies {
            let dropped = s.n_genes() - genes.len();
            if dropped > 0 {
                info!("study {}: {dropped} genes outside the common universe dropped", s.id());
            }
        }
        let aligned = studies
            .iter()
            .map(|s| if s.genes == genes { s.clone() } else { s.restrict(&genes) })
            .collect();
        Ok(StudySet { genes, studies: aligned })
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn studies(&self) -> &[Study] {
        &self.studies
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn study_ids(&self) -> Vec<String> {
        self.studies.iter().map(|s| s.id.clone()).collect()
    }

    /// DE p-values with one label vector per study (observed or permuted).
    pub fn de_matrix_with_labels(&self, labels: &[Vec<bool>], mode: DeMode) -> Result<PValueMatrix> {
        let tails: Vec<(Vec<f64>, Vec<f64>)> =
            self.studies.par_iter().zip(labels).map(|(s, l)| s.welch_tails(l)).collect();
        let g = self.n_genes();
        let k = self.n_studies();
        let mut left = vec![0.0; g * k];
        let mut right = vec![0.0; g * k];
        for (j, (l, r)) in tails.iter().enumerate() {
            for i in 0..g {
                left[i * k + j] = l[i];
                right[i * k + j] = r[i];
            }
        }
        match mode {
            DeMode::OneSidedPair => PValueMatrix::one_sided_pair(self.genes.clone(), self.study_ids(), left, right),
            DeMode::TwoSided => {
                let two = left.iter().zip(&right).map(|(l, r)| (2.0 * l.min(*r)).min(1.0)).collect();
                PValueMatrix::new(self.genes.clone(), self.study_ids(), two)
            }
        }
    }
}

/// Per-study Welch t-tests for every gene.
pub fn de_test_all(studies: &StudySet, mode: DeMode) -> Result<PValueMatrix> {
    for s in studies.studies() {
        let n = s.degenerate_genes();
        if n > 0 {
            warn!("study {}: {n} genes are constant in both classes; assigned p = 1", s.id());
        }
    }
    let labels: Vec<Vec<bool>> = studies.studies().iter().map(|s| s.labels.clone()).collect();
    studies.de_matrix_with_labels(&labels, mode)
}
