//! End-to-end analysis: ingestion, optional r selection, combination,
//! significance and report writing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::advisor::{
    diagnostics_report, select_r_by_count, select_r_by_pathway, PathwayCommittee, RDiagnostics,
    DEFAULT_MAX_SET_SIZE, DEFAULT_MIN_SET_SIZE, DEFAULT_TOP_PATHWAYS,
};
use crate::combine::{combine_matrix, MetaMethod, MetaResult, VoteMode};
use crate::error::{Error, Result};
use crate::io::{self, OutputSet};
use crate::kernel::Sides;
use crate::matrix::PValueMatrix;
use crate::significance::{
    assess, Inference, PermutationPlan, PermutationScope, DEFAULT_LABEL_PERMUTATIONS,
    DEFAULT_SHUFFLE_PERMUTATIONS,
};
use crate::study::{de_test_all, DeMode, StudySet};

pub const GENE_TABLE: &str = "genes.tsv";
pub const COUNT_DIAGNOSTICS: &str = "r_diagnostics.tsv";
pub const PATHWAY_DIAGNOSTICS: &str = "r_pathways.tsv";
pub const ENRICHMENT_SUMMARY: &str = "r_enrichment.tsv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyInput {
    pub id: String,
    pub expression: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// Raw expression per study; p-values come from Welch tests.
    Expression { studies: Vec<StudyInput> },
    /// Precomputed genes x studies p-values (two tails for one-sided rOP).
    Pvalues { pvalues: PathBuf, pvalues_right: Option<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Rop,
    RopOneSided,
    Fisher,
    Stouffer,
    #[serde(rename = "minp")]
    MinP,
    #[serde(rename = "maxp")]
    MaxP,
    VoteCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoR {
    Counts,
    Pathways,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    ParametricBh,
    ParametricBy,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSpec,
    pub method: MethodKind,
    /// Required for rOP methods unless `auto_r` is set.
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub auto_r: Option<AutoR>,
    #[serde(default = "default_alpha")]
    pub alpha_vc: f64,
    #[serde(default = "default_pi0")]
    pub pi0: f64,
    #[serde(default)]
    pub vote_mode: VoteMode,
    #[serde(default = "default_alpha")]
    pub fdr: f64,
    #[serde(default)]
    pub route: Route,
    #[serde(default = "default_label_perms")]
    pub permutations: usize,
    #[serde(default = "default_shuffle_perms")]
    pub shuffle_permutations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gene_sets: Option<PathBuf>,
    #[serde(default = "default_min_set")]
    pub min_set_size: usize,
    #[serde(default = "default_max_set")]
    pub max_set_size: usize,
    #[serde(default = "default_top")]
    pub top_pathways: usize,
    /// Alternative of the sequential signed-rank tests.
    #[serde(default = "default_sequential_sides")]
    pub sequential_sides: Sides,
    pub output_dir: PathBuf,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_pi0() -> f64 {
    0.5
}
fn default_label_perms() -> usize {
    DEFAULT_LABEL_PERMUTATIONS
}
fn default_shuffle_perms() -> usize {
    DEFAULT_SHUFFLE_PERMUTATIONS
}
fn default_min_set() -> usize {
    DEFAULT_MIN_SET_SIZE
}
fn default_max_set() -> usize {
    DEFAULT_MAX_SET_SIZE
}
fn default_top() -> usize {
    DEFAULT_TOP_PATHWAYS
}
fn default_sequential_sides() -> Sides {
    Sides::Right
}

impl RunConfig {
    /// Defaults for everything except input, method and output directory.
    pub fn new(input: InputSpec, method: MethodKind, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input,
            method,
            r: None,
            auto_r: None,
            alpha_vc: default_alpha(),
            pi0: default_pi0(),
            vote_mode: VoteMode::default(),
            fdr: default_alpha(),
            route: Route::default(),
            permutations: default_label_perms(),
            shuffle_permutations: default_shuffle_perms(),
            seed: 0,
            gene_sets: None,
            min_set_size: default_min_set(),
            max_set_size: default_max_set(),
            top_pathways: default_top(),
            sequential_sides: default_sequential_sides(),
            output_dir: output_dir.into(),
        }
    }

    fn is_rop(&self) -> bool {
        matches!(self.method, MethodKind::Rop | MethodKind::RopOneSided)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.into()));
        if !(self.fdr > 0.0 && self.fdr < 1.0) {
            return bad("fdr must lie in (0, 1)");
        }
        if self.is_rop() {
            match (self.r, self.auto_r) {
                (None, None) => return bad("rOP needs r or an automatic r selection mode"),
                (Some(_), Some(_)) => return bad("give either r or automatic r selection, not both"),
                _ => {}
            }
        } else if self.r.is_some() || self.auto_r.is_some() {
            return bad("r and automatic r selection apply only to rOP methods");
        }
        if self.auto_r == Some(AutoR::Pathways) && self.gene_sets.is_none() {
            return bad("pathway-based r selection needs a gene set file");
        }
        if self.route == Route::Permutation && !matches!(self.input, InputSpec::Expression { .. }) {
            return bad("permutation inference needs expression input, not precomputed p-values");
        }
        if self.method == MethodKind::RopOneSided {
            if let InputSpec::Pvalues { pvalues_right: None, .. } = self.input {
                return bad("one-sided rOP on precomputed p-values needs the right-tail table");
            }
        }
        if let InputSpec::Expression { studies } = &self.input {
            if studies.len() < 2 {
                return bad("meta-analysis needs at least 2 studies");
            }
        }
        if self.min_set_size > self.max_set_size {
            return bad("min_set_size exceeds max_set_size");
        }
        PermutationPlan::new(self.permutations, self.seed, PermutationScope::ClassLabelsWithinStudy)?;
        PermutationPlan::new(self.shuffle_permutations, self.seed, PermutationScope::PvaluesAcrossGenesWithinStudy)?;
        Ok(())
    }

    /// The combiner for a given r (ignored for non-rOP methods).
    pub fn meta_method(&self, r: usize) -> MetaMethod {
        match self.method {
            MethodKind::Rop => MetaMethod::Rop { r },
            MethodKind::RopOneSided => MetaMethod::RopOneSided { r },
            MethodKind::Fisher => MetaMethod::Fisher,
            MethodKind::Stouffer => MetaMethod::Stouffer,
            MethodKind::MinP => MetaMethod::MinP,
            MethodKind::MaxP => MetaMethod::MaxP,
            MethodKind::VoteCount => MetaMethod::VoteCount { alpha: self.alpha_vc, pi0: self.pi0, mode: self.vote_mode },
        }
    }

    pub fn inference(&self) -> Inference {
        match self.route {
            Route::ParametricBh => Inference::ParametricBh,
            Route::ParametricBy => Inference::ParametricBy,
            Route::Permutation => Inference::Permutation {
                plan: PermutationPlan {
                    b: self.permutations,
                    seed: self.seed,
                    scope: PermutationScope::ClassLabelsWithinStudy,
                },
            },
        }
    }

    fn de_mode(&self) -> DeMode {
        if self.method == MethodKind::RopOneSided {
            DeMode::OneSidedPair
        } else {
            DeMode::TwoSided
        }
    }

    fn input_paths(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = match &self.input {
            InputSpec::Expression { studies } => {
                studies.iter().flat_map(|s| [s.expression.clone(), s.labels.clone()]).collect()
            }
            InputSpec::Pvalues { pvalues, pvalues_right } => {
                std::iter::once(pvalues.clone()).chain(pvalues_right.clone()).collect()
            }
        };
        v.extend(self.gene_sets.clone());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub method: MetaMethod,
    pub selected_r: Option<usize>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub result: MetaResult,
    pub counts: Option<RDiagnostics>,
    pub committee: Option<PathwayCommittee>,
    pub selected_r: Option<usize>,
    pub manifest: Manifest,
    pub outputs: Vec<PathBuf>,
}

/// Loaded analysis input.
pub enum Loaded {
    Studies(StudySet, PValueMatrix),
    Matrix(PValueMatrix),
}

impl Loaded {
    pub fn matrix(&self) -> &PValueMatrix {
        match self {
            Loaded::Studies(_, m) | Loaded::Matrix(m) => m,
        }
    }
}

/// Reads the inputs and produces the per-study p-value matrix.
pub fn load_input(config: &RunConfig) -> Result<Loaded> {
    match &config.input {
        InputSpec::Expression { studies } => {
            let loaded = studies
                .par_iter()
                .map(|s| io::load_study(&s.id, &s.expression, &s.labels))
                .collect::<Result<Vec<_>>>()?;
            let set = StudySet::new(loaded)?;
            let matrix = de_test_all(&set, config.de_mode())?;
            Ok(Loaded::Studies(set, matrix))
        }
        InputSpec::Pvalues { pvalues, pvalues_right } => {
            Ok(Loaded::Matrix(io::load_pvalue_matrix(pvalues, pvalues_right.as_deref())?))
        }
    }
}

/// Runs the analysis and writes the gene table, diagnostics and manifest
/// into `config.output_dir`. Files written before a failure are removed.
pub fn run_pipeline(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let loaded = load_input(config)?;
    let matrix = loaded.matrix();
    let k = matrix.n_studies();

    let gene_sets = match &config.gene_sets {
        Some(p) => Some(io::load_gmt(p)?.restrict(matrix.genes(), config.min_set_size, config.max_set_size)),
        None => None,
    };
    let run_counts = config.auto_r.is_some();
    let counts = if run_counts {
        let plan = PermutationPlan::new(config.shuffle_permutations, config.seed, PermutationScope::PvaluesAcrossGenesWithinStudy)?;
        Some(select_r_by_count(matrix, &plan, config.fdr)?)
    } else {
        None
    };
    let committee = match (&gene_sets, config.auto_r) {
        (Some(sets), Some(_)) => Some(select_r_by_pathway(matrix, sets, config.top_pathways, config.sequential_sides)?),
        _ => None,
    };
    let selected_r = match config.auto_r {
        None => config.r,
        Some(AutoR::Counts) => counts.as_ref().map(|c| c.selected_r_counts),
        Some(AutoR::Pathways) => committee.as_ref().map(|c| c.selected_r_pathways),
    };
    let method = config.meta_method(selected_r.unwrap_or(1));
    method.validate(k)?;

    let mut result = combine_matrix(matrix, &method)?;
    let studies = match &loaded {
        Loaded::Studies(set, _) => Some((set, config.de_mode())),
        Loaded::Matrix(_) => None,
    };
    assess(&mut result, &config.inference(), studies)?;

    let dir = &config.output_dir;
    let mut out = OutputSet::new();
    out.write(&dir.join(GENE_TABLE), &io::gene_table(&result))?;
    if let Some(c) = &counts {
        out.write(&dir.join(COUNT_DIAGNOSTICS), &io::count_diagnostics_table(c))?;
        if let Some(p) = &committee {
            out.write(&dir.join(PATHWAY_DIAGNOSTICS), &io::committee_table(p))?;
            let report = diagnostics_report(c, Some(p))?;
            out.write(&dir.join(ENRICHMENT_SUMMARY), &io::enrichment_table(&report))?;
        }
    }
    let inputs = config
        .input_paths()
        .into_iter()
        .map(|path| Ok(InputDigest { sha256: io::file_digest(&path)?, path }))
        .collect::<Result<Vec<_>>>()?;
    let mut outputs = out.paths().to_vec();
    outputs.push(dir.join(MANIFEST));
    let manifest = Manifest {
        tool: "rop".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        config: config.clone(),
        method,
        selected_r: if config.is_rop() { selected_r } else { None },
        inputs,
        outputs,
    };
    out.write(&dir.join(MANIFEST), &serde_json::to_string_pretty(&manifest)?)?;
    let outputs = out.commit();
    Ok(RunArtifacts { result, counts, committee, selected_r: manifest.selected_r, manifest, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn validation_rules() {
        let input = InputSpec::Pvalues { pvalues: "x".into(), pvalues_right: None };
        let mut c = RunConfig::new(input, MethodKind::Rop, "out");
        assert!(c.validate().is_err());
        c.r = Some(2);
        assert!(c.validate().is_ok());
        c.auto_r = Some(AutoR::Counts);
        assert!(c.validate().is_err());
        c.r = None;
        c.route = Route::Permutation;
        assert!(c.validate().is_err());
        c.route = Route::ParametricBh;
        c.method = MethodKind::RopOneSided;
        assert!(c.validate().is_err());
        c.method = MethodKind::Fisher;
        assert!(c.validate().is_err());
        c.auto_r = None;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn pvalue_run_writes_and_reproduces() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "p.tsv", "gene\ts1\ts2\ts3\ng1\t0.01\t0.02\t0.5\ng2\t0.3\t0.4\t0.9\ng3\t0.001\t0.002\t0.003\n");
        let mut c = RunConfig::new(
            InputSpec::Pvalues { pvalues: p, pvalues_right: None },
            MethodKind::Rop,
            d.path().join("out"),
        );
        c.r = Some(2);
        let a = run_pipeline(&c).unwrap();
        let first = std::fs::read(d.path().join("out").join(GENE_TABLE)).unwrap();
        let m = Manifest::read(&d.path().join("out").join(MANIFEST)).unwrap();
        assert_eq!(m.config, c);
        assert_eq!(m.inputs.len(), 1);
        assert_eq!(a.result.records.len(), 3);
        run_pipeline(&m.config).unwrap();
        assert_eq!(std::fs::read(d.path().join("out").join(GENE_TABLE)).unwrap(), first);
    }

    #[test]
    fn failure_leaves_no_outputs() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "p.tsv", "gene\ts1\ts2\ng1\t0.01\t0.02\n");
        let mut c = RunConfig::new(
            InputSpec::Pvalues { pvalues: p, pvalues_right: None },
            MethodKind::Rop,
            d.path().join("out"),
        );
        c.r = Some(3);
        assert!(run_pipeline(&c).is_err());
        assert!(!d.path().join("out").join(GENE_TABLE).exists());
    }
}
