use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `p_left + p_right = 1` for paired one-sided matrices.
pub const PAIR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sidedness {
    TwoSided,
    /// `values` holds the left-tail p-values and `right` the opposite tail,
    /// both genes x studies in row-major order.
    OneSidedPair { right: Vec<f64> },
}

/// Genes x studies matrix of per-study p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueMatrix {
    genes: Vec<String>,
    studies: Vec<String>,
    values: Vec<f64>,
    sidedness: Sidedness,
}

fn check_entries(values: &[f64], what: &str, n_studies: usize, genes: &[String]) -> Result<()> {
    for (idx, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "{what} p-value {v} for gene {} study {} is outside [0, 1]",
                genes[idx / n_studies],
                idx % n_studies + 1
            )));
        }
    }
    Ok(())
}

impl PValueMatrix {
    /// Two-sided matrix from row-major `values` (`genes.len() * studies.len()`).
    pub fn new(genes: Vec<String>, studies: Vec<String>, values: Vec<f64>) -> Result<Self> {
        Self::build(genes, studies, values, Sidedness::TwoSided)
    }

    pub fn one_sided_pair(
        genes: Vec<String>,
        studies: Vec<String>,
        left: Vec<f64>,
        right: Vec<f64>,
    ) -> Result<Self> {
        Self::build(genes, studies, left, Sidedness::OneSidedPair { right })
    }

    fn build(genes: Vec<String>, studies: Vec<String>, values: Vec<f64>, sidedness: Sidedness) -> Result<Self> {
        let g = genes.len();
        let k = studies.len();
        if g == 0 {
            return Err(Error::Validation("p-value matrix has no genes".into()));
        }
        if k < 2 {
            return Err(Error::Validation(format!("meta-analysis needs K >= 2 studies, got {k}")));
        }
        if values.len() != g * k {
            return Err(Error::Validation(format!(
                "p-value matrix has {} entries, expected {g} x {k}",
                values.len()
            )));
        }
        check_entries(&values, "left/two-sided", k, &genes)?;
        if let Sidedness::OneSidedPair { right } = &sidedness {
            if right.len() != values.len() {
                return Err(Error::Validation("one-sided matrices differ in shape".into()));
            }
            check_entries(right, "right", k, &genes)?;
            for (idx, (l, r)) in values.iter().zip(right).enumerate() {
                if (l + r - 1.0).abs() > PAIR_TOLERANCE {
                    return Err(Error::Validation(format!(
                        "gene {} study {}: p_left + p_right = {} is not 1",
                        genes[idx / k],
                        idx % k + 1,
                        l + r
                    )));
                }
            }
        }
        Ok(PValueMatrix { genes, studies, values, sidedness })
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn studies(&self) -> &[String] {
        &self.studies
    }

    pub fn sidedness(&self) -> &Sidedness {
        &self.sidedness
    }

    pub fn is_one_sided(&self) -> bool {
        matches!(self.sidedness, Sidedness::OneSidedPair { .. })
    }

    /// Two-sided (or left-tail) p-values of gene `g`.
    pub fn row(&self, g: usize) -> &[f64] {
        let k = self.n_studies();
        &self.values[g * k..(g + 1) * k]
    }

    /// Right-tail p-values of gene `g`, if the matrix carries them.
    pub fn right_row(&self, g: usize) -> Option<&[f64]> {
        let k = self.n_studies();
        match &self.sidedness {
            Sidedness::OneSidedPair { right } => Some(&right[g * k..(g + 1) * k]),
            Sidedness::TwoSided => None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column `k` across genes.
    pub fn column(&self, k: usize) -> Vec<f64> {
        let n = self.n_studies();
        (0..self.n_genes()).map(|g| self.values[g * n + k]).collect()
    }

    /// Two-sided p-values derived from a paired matrix: `2 * min(left, right)`.
    pub fn to_two_sided(&self) -> PValueMatrix {
        match &self.sidedness {
            Sidedness::TwoSided => self.clone(),
            Sidedness::OneSidedPair { right } => PValueMatrix {
                genes: self.genes.clone(),
                studies: self.studies.clone(),
                values: self.values.iter().zip(right).map(|(l, r)| (2.0 * l.min(*r)).min(1.0)).collect(),
                sidedness: Sidedness::TwoSided,
            },
        }
    }

    /// Same shape, new two-sided values; used by resampling routines.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> PValueMatrix {
        debug_assert_eq!(values.len(), self.values.len());
        PValueMatrix {
            genes: self.genes.clone(),
            studies: self.studies.clone(),
            values,
            sidedness: Sidedness::TwoSided,
        }
    }
}
