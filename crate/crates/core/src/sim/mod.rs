//! Simulated multi-study expression data with clustered gene correlation.
//!
//! Per dataset:
//! 1. genes are assigned at random to `n_clusters` clusters of `cluster_size`;
//! 2. each (cluster, study) gets a covariance drawn from `W^-1(Psi, df)` with
//!    `Psi = 0.5 I + 0.5 J`, rescaled to unit diagonal;
//! 3. expression is multivariate normal within clusters and N(0, 1) otherwise;
//! 4. each of the first `n_de_genes` genes is DE in `t_g ~ U{1..K}` studies,
//!    chosen uniformly among subsets of size `t_g`;
//! 5. case samples are shifted by `mu_gk`, drawn from `[-max, -min] U [min, max]`.

pub mod bench;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Domain};
use crate::study::{Study, StudySet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_genes: usize,
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub n_studies: usize,
    pub n_cases: usize,
    pub n_controls: usize,
    pub n_de_genes: usize,
    pub effect_min: f64,
    pub effect_max: f64,
    /// Use one sign per gene across studies instead of one per (gene, study).
    pub consistent_sign: bool,
    pub wishart_df: f64,
    pub correlated: bool,
    pub fdr_level: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_genes: 10_000,
            n_clusters: 200,
            cluster_size: 20,
            n_studies: 10,
            n_cases: 50,
            n_controls: 50,
            n_de_genes: 1_000,
            effect_min: 0.5,
            effect_max: 1.0,
            consistent_sign: false,
            wishart_df: 60.0,
            correlated: true,
            fdr_level: 0.05,
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Reduced scale: 2000 genes, 20 clusters, 200 DE genes.
    pub fn desk() -> Self {
        SimConfig { n_genes: 2_000, n_clusters: 20, n_de_genes: 200, ..SimConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.n_genes == 0 || self.n_studies == 0 {
            return bad("n_genes and n_studies must be positive".into());
        }
        if self.n_cases < 2 || self.n_controls < 2 {
            return bad("each study needs at least 2 cases and 2 controls".into());
        }
        if self.n_clusters * self.cluster_size > self.n_genes {
            return bad(format!(
                "{} clusters of {} genes exceed {} genes",
                self.n_clusters, self.cluster_size, self.n_genes
            ));
        }
        if self.n_de_genes > self.n_genes {
            return bad("n_de_genes exceeds n_genes".into());
        }
        if !(self.effect_min >= 0.0 && self.effect_max >= self.effect_min && self.effect_max.is_finite()) {
            return bad(format!("effect range [{}, {}] is invalid", self.effect_min, self.effect_max));
        }
        if self.correlated && self.cluster_size > 0 && !(self.wishart_df > (self.cluster_size - 1) as f64) {
            return bad(format!(
                "Wishart df {} must exceed cluster_size - 1 = {}",
                self.wishart_df,
                self.cluster_size - 1
            ));
        }
        if !(self.fdr_level > 0.0 && self.fdr_level < 1.0) {
            return bad(format!("fdr_level {} outside (0, 1)", self.fdr_level));
        }
        Ok(())
    }
}

/// Ground truth behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    /// Number of studies in which each gene is DE.
    pub t_g: Vec<usize>,
    /// `delta[g * K + k]`: gene g is DE in study k.
    pub delta: Vec<bool>,
    /// `mu[g * K + k]`: case mean shift (0 where not DE).
    pub mu: Vec<f64>,
    /// Cluster of each gene, if any.
    pub cluster: Vec<Option<usize>>,
}

/// Inverse-Wishart draw `W^-1(psi, df)`: a Bartlett-decomposed Wishart with
/// scale `psi^-1`, inverted.
pub fn inverse_wishart(psi: &DMatrix<f64>, df: f64, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let p = psi.nrows();
    if !(df > (p as f64) - 1.0) {
        return Err(Error::Validation(format!("Wishart df {df} must exceed dimension - 1 = {}", p - 1)));
    }
    let scale = psi
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Validation("inverse-Wishart scale is singular".into()))?;
    let l = scale
        .cholesky()
        .ok_or_else(|| Error::Validation("inverse-Wishart scale is not positive definite".into()))?
        .l();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::Validation(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = &l * a;
    let w = &la * la.transpose();
    w.try_inverse().ok_or_else(|| Error::NonConvergence("Wishart draw is singular".into()))
}

/// Rescales a covariance matrix to unit diagonal.
pub fn to_correlation(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d: DVector<f64> = cov.diagonal().map(|v| 1.0 / v.sqrt());
    DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| cov[(i, j)] * d[i] * d[j])
}

fn compound_symmetric(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 })
}

fn simulate_truth(config: &SimConfig, rng: &mut ChaCha8Rng) -> SimTruth {
    let (g, k) = (config.n_genes, config.n_studies);
    let mut genes: Vec<usize> = (0..g).collect();
    genes.shuffle(rng);
    let mut cluster = vec![None; g];
    for c in 0..config.n_clusters {
        for &gene in &genes[c * config.cluster_size..(c + 1) * config.cluster_size] {
            cluster[gene] = Some(c);
        }
    }
    let mut t_g = vec![0; g];
    let mut delta = vec![false; g * k];
    let mut mu = vec![0.0; g * k];
    let mut studies: Vec<usize> = (0..k).collect();
    for gene in 0..config.n_de_genes {
        let t = rng.random_range(1..=k);
        t_g[gene] = t;
        studies.shuffle(rng);
        let gene_sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for &s in &studies[..t] {
            delta[gene * k + s] = true;
            let magnitude = config.effect_min + (config.effect_max - config.effect_min) * rng.random::<f64>();
            let sign = if config.consistent_sign {
                gene_sign
            } else if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            };
            mu[gene * k + s] = sign * magnitude;
        }
    }
    SimTruth { t_g, delta, mu, cluster }
}

fn simulate_study(config: &SimConfig, truth: &SimTruth, members: &[Vec<usize>], k: usize) -> Result<Study> {
    let mut rng = substream(config.seed, Domain::Simulation, 1, k as u64);
    let (g, n_studies) = (config.n_genes, config.n_studies);
    let n = config.n_controls + config.n_cases;
    let mut expr = vec![0.0; g * n];
    if config.correlated {
        let psi = compound_symmetric(config.cluster_size);
        for genes in members {
            let corr = to_correlation(&inverse_wishart(&psi, config.wishart_df, &mut rng)?);
            let l = corr
                .cholesky()
                .ok_or_else(|| Error::NonConvergence("cluster correlation is not positive definite".into()))?
                .l();
            for s in 0..n {
                let z = DVector::<f64>::from_fn(genes.len(), |_, _| rng.sample(StandardNormal));
                let x = &l * z;
                for (i, &gene) in genes.iter().enumerate() {
                    expr[gene * n + s] = x[i];
                }
            }
        }
    }
    for gene in 0..g {
        let clustered = config.correlated && truth.cluster[gene].is_some();
        let shift = truth.mu[gene * n_studies + k];
        for s in 0..n {
            let cell = &mut expr[gene * n + s];
            if !clustered {
                *cell = rng.sample(StandardNormal);
            }
            if s >= config.n_controls {
                *cell += shift;
            }
        }
    }
    let labels = (0..n).map(|s| s >= config.n_controls).collect();
    Study::new(
        format!("study{}", k + 1),
        (0..g).map(|i| format!("gene{}", i + 1)).collect(),
        (0..n).map(|s| format!("sample{}", s + 1)).collect(),
        expr,
        labels,
    )
}

/// One simulated dataset and its ground truth; deterministic given the seed.
pub fn generate_dataset(config: &SimConfig) -> Result<(StudySet, SimTruth)> {
    config.validate()?;
    let mut rng = substream(config.seed, Domain::Simulation, 0, 0);
    let truth = simulate_truth(config, &mut rng);
    let mut members = vec![Vec::new(); config.n_clusters];
    for (gene, c) in truth.cluster.iter().enumerate() {
        if let Some(c) = c {
            members[*c].push(gene);
        }
    }
    let studies = (0..config.n_studies)
        .into_par_iter()
        .map(|k| simulate_study(config, &truth, &members, k))
        .collect::<Result<Vec<_>>>()?;
    Ok((StudySet::new(studies)?, truth))
}
