use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use rop_core::kernel::Sides;
use rop_core::pipeline::{AutoR, InputSpec, Manifest, MethodKind, Route, RunConfig, StudyInput};
use rop_core::VoteMode;

/// Invalid combination of command line arguments (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Parses a value with the same spelling the config files use.
fn serde_value<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "rop", version, about = "r-th ordered p-value meta-analysis")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Combine per-study p-values and write the ranked gene table.
    Combine(AnalysisArgs),
    /// Choose r from detection counts and, with gene sets, pathway enrichment.
    SelectR(AnalysisArgs),
    /// Analytic power curves for rOP and vote counting.
    Power(PowerArgs),
    /// Run the simulation benchmark.
    Simulate(SimulateArgs),
    /// Vote-counting analysis of the inputs.
    VoteCount(AnalysisArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AnalysisArgs {
    /// Run configuration: TOML or JSON RunConfig, or a manifest.json from an
    /// earlier run. Flags given alongside override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Genes x studies p-value table.
    #[arg(long, value_name = "TSV", conflicts_with = "study")]
    pub pvalues: Option<PathBuf>,
    /// Right-tail table paired with --pvalues (one-sided rOP).
    #[arg(long, value_name = "TSV", requires = "pvalues")]
    pub pvalues_right: Option<PathBuf>,
    /// One study: id, expression TSV and label TSV. Repeat per study.
    #[arg(long, num_args = 3, value_names = ["ID", "EXPR", "LABELS"], action = clap::ArgAction::Append)]
    pub study: Vec<String>,
    /// rop, rop_one_sided, fisher, stouffer, minp, maxp or vote_count.
    #[arg(long, value_parser = serde_value::<MethodKind>)]
    pub method: Option<MethodKind>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Pick r automatically: counts or pathways.
    #[arg(long, value_parser = serde_value::<AutoR>)]
    pub auto_r: Option<AutoR>,
    /// Per-study significance level for vote counting.
    #[arg(long)]
    pub alpha_vc: Option<f64>,
    /// Vote-counting proportion under the null.
    #[arg(long)]
    pub pi0: Option<f64>,
    /// exceedance or majority_gated.
    #[arg(long, value_parser = serde_value::<VoteMode>)]
    pub vote_mode: Option<VoteMode>,
    #[arg(long)]
    pub fdr: Option<f64>,
    /// parametric_bh, parametric_by or permutation.
    #[arg(long, value_parser = serde_value::<Route>)]
    pub route: Option<Route>,
    /// Class-label permutations for permutation inference.
    #[arg(long)]
    pub permutations: Option<usize>,
    /// P-value shuffles behind the detection-count baseline.
    #[arg(long)]
    pub shuffle_permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// GMT gene set file for pathway-based r selection.
    #[arg(long, value_name = "GMT")]
    pub gene_sets: Option<PathBuf>,
    #[arg(long)]
    pub min_set_size: Option<usize>,
    #[arg(long)]
    pub max_set_size: Option<usize>,
    #[arg(long)]
    pub top_pathways: Option<usize>,
    /// Alternative of the sequential signed-rank tests: right, left or two.
    #[arg(long, value_parser = serde_value::<Sides>)]
    pub sequential_sides: Option<Sides>,
    /// Output directory.
    #[arg(long, short, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Reads a RunConfig from TOML, JSON, or the `config` entry of a manifest.
pub fn read_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if !is_json {
        return toml::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("config").is_some() && value.get("tool").is_some() {
        return Ok(Manifest::read(path)?.config);
    }
    serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))
}

impl AnalysisArgs {
    fn input(&self) -> anyhow::Result<Option<InputSpec>> {
        if let Some(p) = &self.pvalues {
            return Ok(Some(InputSpec::Pvalues { pvalues: p.clone(), pvalues_right: self.pvalues_right.clone() }));
        }
        if self.study.is_empty() {
            return Ok(None);
        }
        let studies = self
            .study
            .chunks(3)
            .map(|c| StudyInput { id: c[0].clone(), expression: PathBuf::from(&c[1]), labels: PathBuf::from(&c[2]) })
            .collect();
        Ok(Some(InputSpec::Expression { studies }))
    }

    /// Effective run configuration: the config file (if any) with flags applied.
    pub fn run_config(&self, default_method: MethodKind) -> anyhow::Result<RunConfig> {
        let input = self.input()?;
        let mut cfg = match (&self.config, input) {
            (Some(path), input) => {
                let mut cfg = read_config(path)?;
                if let Some(input) = input {
                    cfg.input = input;
                }
                cfg
            }
            (None, Some(input)) => RunConfig::new(input, default_method, "rop-out"),
            (None, None) => bail!(UsageError("no input: give --pvalues, --study or --config".into())),
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if self.r.is_some() {
            cfg.r = self.r;
            cfg.auto_r = None;
        }
        if self.auto_r.is_some() {
            cfg.auto_r = self.auto_r;
            cfg.r = None;
        }
        macro_rules! overlay {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        overlay!(alpha_vc, pi0, vote_mode, fdr, route, permutations, shuffle_permutations, seed);
        overlay!(min_set_size, max_set_size, top_pathways, sequential_sides);
        if self.gene_sets.is_some() {
            cfg.gene_sets = self.gene_sets.clone();
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// Number of studies.
    #[arg(long)]
    pub k: usize,
    /// Sweep r at fixed --r0, or r0 at fixed --r.
    #[arg(long, default_value = "r", value_parser = ["r", "r0"])]
    pub sweep: String,
    /// True number of DE studies when sweeping r.
    #[arg(long)]
    pub r0: Option<usize>,
    /// rOP order when sweeping r0.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Per-study probability of p <= beta under the alternative. Repeatable.
    #[arg(long = "beta-prime", default_values_t = [0.2, 0.5, 0.9])]
    pub beta_prime: Vec<f64>,
    /// Instead of rOP curves, tabulate vote-counting and count power over
    /// --ks with this single-study power.
    #[arg(long, value_name = "POWER")]
    pub vote_counting: Option<f64>,
    /// Single-study success probability for the count-power column.
    #[arg(long, default_value_t = 0.7)]
    pub count_success: f64,
    /// Significant-share threshold for vote counting and count power.
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    /// Study counts for --vote-counting, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 200])]
    pub ks: Vec<usize>,
    /// Write the table here instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML benchmark configuration; desk scale when omitted.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Start from the full-scale simulation (10000 genes, 200 clusters).
    #[arg(long, conflicts_with = "config")]
    pub full: bool,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, value_name = "DIR", default_value = "rop-sim")]
    pub out: PathBuf,
}
