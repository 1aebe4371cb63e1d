//! Replicated simulation benchmark: FDR1/FDR2, per-t_g power and overlap
//! of detections across r.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_dataset, SimConfig, SimTruth};
use crate::combine::{combine_matrix, MetaMethod, VoteMode};
use crate::error::Result;
use crate::rng::{substream, Domain};
use crate::significance::{assess, Inference, PermutationPlan};
use crate::study::{de_test_all, DeMode};
use rand::Rng;

/// Multiplicity control applied to one benchmarked method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    Bh,
    By,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchMethod {
    #[serde(flatten)]
    pub method: MetaMethod,
    #[serde(default)]
    pub correction: Correction,
}

impl BenchMethod {
    pub fn new(method: MetaMethod, correction: Correction) -> Self {
        BenchMethod { method, correction }
    }

    pub fn label(&self) -> String {
        let c = match self.correction {
            Correction::Bh => "BH",
            Correction::By => "BY",
            Correction::Permutation => "perm",
        };
        format!("{} {c}", self.method.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sim: SimConfig,
    pub replicates: usize,
    /// r defining FDR2 (detections with t_g < r count as false).
    pub target_r: usize,
    /// Label permutations for `permutation` corrections.
    pub permutations: usize,
    /// r values compared by the detection-overlap table; empty to skip.
    pub stability_r: Vec<usize>,
    pub methods: Vec<BenchMethod>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sim: SimConfig::desk(),
            replicates: 20,
            target_r: 6,
            permutations: 500,
            stability_r: vec![5, 6, 7],
            methods: default_methods(0.05),
        }
    }
}

/// rOP(6) with BH and BY, the classical combiners and vote counting.
pub fn default_methods(alpha: f64) -> Vec<BenchMethod> {
    vec![
        BenchMethod::new(MetaMethod::Rop { r: 6 }, Correction::Bh),
        BenchMethod::new(MetaMethod::Rop { r: 6 }, Correction::By),
        BenchMethod::new(MetaMethod::Fisher, Correction::Bh),
        BenchMethod::new(MetaMethod::Stouffer, Correction::Bh),
        BenchMethod::new(MetaMethod::MinP, Correction::Bh),
        BenchMethod::new(MetaMethod::MaxP, Correction::Bh),
        BenchMethod::new(
            MetaMethod::VoteCount { alpha, pi0: 0.5, mode: VoteMode::MajorityGated },
            Correction::Bh,
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateScore {
    pub detected: usize,
    pub fdr1: f64,
    pub fdr2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label: String,
    pub method: BenchMethod,
    pub fdr1: MeanSd,
    pub fdr2: MeanSd,
    pub detected: MeanSd,
    pub replicates: Vec<ReplicateScore>,
    /// `power_by_tg[h - 1]`: detected share of genes with t_g = h, pooled over replicates.
    pub power_by_tg: Vec<f64>,
    /// Genes with t_g = h, summed over replicates.
    pub genes_by_tg: Vec<usize>,
    /// Detected genes with t_g = h, summed over replicates.
    pub detected_by_tg: Vec<usize>,
}

impl MethodSummary {
    /// Detected share of genes with t_g in `range`, pooled over replicates.
    pub fn power_over(&self, range: std::ops::RangeInclusive<usize>) -> f64 {
        let (mut hits, mut total) = (0, 0);
        for t in range.filter(|t| *t >= 1 && *t <= self.genes_by_tg.len()) {
            hits += self.detected_by_tg[t - 1];
            total += self.genes_by_tg[t - 1];
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub r_values: Vec<usize>,
    /// `overlap[i][j]`: share of rOP(r_i) detections also made by rOP(r_j),
    /// pooled over replicates.
    pub overlap: Vec<Vec<f64>>,
}

impl StabilityTable {
    pub fn get(&self, from: usize, to: usize) -> Option<f64> {
        let i = self.r_values.iter().position(|r| *r == from)?;
        let j = self.r_values.iter().position(|r| *r == to)?;
        Some(self.overlap[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub methods: Vec<MethodSummary>,
    pub stability: Option<StabilityTable>,
}

impl BenchReport {
    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.label == label)
    }
}

/// FDR1 and FDR2 of a detection set; 0/0 is 0.
pub fn score(detected: &[usize], truth: &SimTruth, target_r: usize) -> ReplicateScore {
    let n = detected.len();
    if n == 0 {
        return ReplicateScore { detected: 0, fdr1: 0.0, fdr2: 0.0 };
    }
    let f1 = detected.iter().filter(|&&g| truth.t_g[g] == 0).count();
    let f2 = detected.iter().filter(|&&g| truth.t_g[g] < target_r).count();
    ReplicateScore { detected: n, fdr1: f1 as f64 / n as f64, fdr2: f2 as f64 / n as f64 }
}

struct ReplicateOutput {
    truth: SimTruth,
    detections: Vec<Vec<usize>>,
    stability: Vec<Vec<usize>>,
}

fn replicate_seed(base: u64, i: usize) -> u64 {
    substream(base, Domain::Simulation, 1_000_000 + i as u64, 0).random()
}

fn run_replicate(config: &BenchConfig, i: usize) -> Result<ReplicateOutput> {
    let seed = replicate_seed(config.sim.seed, i);
    let sim = SimConfig { seed, ..config.sim.clone() };
    let (studies, truth) = generate_dataset(&sim)?;
    let one_sided = config.methods.iter().any(|m| matches!(m.method, MetaMethod::RopOneSided { .. }));
    let mode = if one_sided { DeMode::OneSidedPair } else { DeMode::TwoSided };
    let matrix = de_test_all(&studies, mode)?;
    let fdr = config.sim.fdr_level;
    let mut detections = Vec::with_capacity(config.methods.len());
    for (mi, m) in config.methods.iter().enumerate() {
        let mut res = combine_matrix(&matrix, &m.method)?;
        let inference = match m.correction {
            Correction::Bh => Inference::ParametricBh,
            Correction::By => Inference::ParametricBy,
            Correction::Permutation => Inference::Permutation {
                plan: PermutationPlan {
                    b: config.permutations,
                    seed: replicate_seed(seed, mi),
                    scope: crate::significance::PermutationScope::ClassLabelsWithinStudy,
                },
            },
        };
        assess(&mut res, &inference, Some((&studies, mode)))?;
        detections.push(res.detected(fdr));
    }
    let stability = config
        .stability_r
        .iter()
        .map(|&r| {
            let mut res = combine_matrix(&matrix, &MetaMethod::Rop { r })?;
            assess(&mut res, &Inference::ParametricBh, None)?;
            Ok(res.detected(fdr))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateOutput { truth, detections, stability })
}

/// Runs all replicates and aggregates scores; deterministic given the seed.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.sim.validate()?;
    if config.replicates == 0 {
        return Err(crate::Error::Validation("replicates must be at least 1".into()));
    }
    for m in &config.methods {
        m.method.validate(config.sim.n_studies)?;
    }
    for &r in &config.stability_r {
        MetaMethod::Rop { r }.validate(config.sim.n_studies)?;
    }
    let outputs = (0..config.replicates)
        .into_par_iter()
        .map(|i| run_replicate(config, i))
        .collect::<Result<Vec<_>>>()?;

    let k = config.sim.n_studies;
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let scores: Vec<ReplicateScore> =
                outputs.iter().map(|o| score(&o.detections[mi], &o.truth, config.target_r)).collect();
            let mut hits = vec![0usize; k];
            let mut totals = vec![0usize; k];
            for o in &outputs {
                for &t in o.truth.t_g.iter().filter(|t| **t > 0) {
                    totals[t - 1] += 1;
                }
                for &g in &o.detections[mi] {
                    let t = o.truth.t_g[g];
                    if t > 0 {
                        hits[t - 1] += 1;
                    }
                }
            }
            let col = |f: fn(&ReplicateScore) -> f64| MeanSd::of(&scores.iter().map(f).collect::<Vec<_>>());
            MethodSummary {
                label: m.label(),
                method: *m,
                fdr1: col(|s| s.fdr1),
                fdr2: col(|s| s.fdr2),
                detected: col(|s| s.detected as f64),
                replicates: scores,
                power_by_tg: hits
                    .iter()
                    .zip(&totals)
                    .map(|(h, t)| if *t == 0 { 0.0 } else { *h as f64 / *t as f64 })
                    .collect(),
                genes_by_tg: totals,
                detected_by_tg: hits,
            }
        })
        .collect();

    let stability = (!config.stability_r.is_empty()).then(|| {
        let n = config.stability_r.len();
        let overlap = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (mut inter, mut total) = (0usize, 0usize);
                        for o in &outputs {
                            let b: std::collections::HashSet<usize> = o.stability[j].iter().copied().collect();
                            inter += o.stability[i].iter().filter(|g| b.contains(g)).count();
                            total += o.stability[i].len();
                        }
                        if total == 0 {
                            0.0
                        } else {
                            inter as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect();
        StabilityTable { r_values: config.stability_r.clone(), overlap }
    });

    Ok(BenchReport { config: config.clone(), methods, stability })
}

/// Detected share per t_g for every method: `(label, t_g, power)` rows.
pub fn per_tg_power(report: &BenchReport) -> Vec<(String, usize, f64)> {
    report
        .methods
        .iter()
        .flat_map(|m| m.power_by_tg.iter().enumerate().map(move |(i, p)| (m.label.clone(), i + 1, *p)))
        .collect()
}

/// Overlap table for rOP detections across `r_values`.
pub fn r_stability(config: &BenchConfig, r_values: &[usize]) -> Result<StabilityTable> {
    let cfg = BenchConfig { methods: Vec::new(), stability_r: r_values.to_vec(), ..config.clone() };
    run_benchmark(&cfg)?
        .stability
        .ok_or_else(|| crate::Error::Validation("no r values given".into()))
}
