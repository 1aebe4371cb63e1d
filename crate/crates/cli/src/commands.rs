use std::path::Path;

use anyhow::{bail, Context};
use log::info;

use rop_core::advisor::{diagnostics_report, select_r_by_count, select_r_by_pathway};
use rop_core::io::{self, OutputSet};
use rop_core::pipeline::{
    load_input, run_pipeline, MethodKind, RunConfig, COUNT_DIAGNOSTICS, ENRICHMENT_SUMMARY, PATHWAY_DIAGNOSTICS,
};
use rop_core::power::{count_power, power_curve, vote_counting_power, Sweep, VoteCriterion};
use rop_core::sim::bench::{run_benchmark, BenchConfig};
use rop_core::sim::SimConfig;
use rop_core::{PermutationPlan, PermutationScope};

use crate::args::{AnalysisArgs, PowerArgs, SimulateArgs, UsageError};

fn summarize(cfg: &RunConfig, run: &rop_core::pipeline::RunArtifacts) {
    let detected = run.result.detected(cfg.fdr).len();
    println!("method\t{}", run.manifest.method.label());
    if let Some(r) = run.selected_r {
        println!("selected_r\t{r}");
    }
    println!("genes\t{}", run.result.records.len());
    println!("detected_at_fdr_{}\t{detected}", cfg.fdr);
    println!("output_dir\t{}", cfg.output_dir.display());
}

pub fn combine(args: &AnalysisArgs) -> anyhow::Result<()> {
    let cfg = args.run_config(MethodKind::Rop)?;
    let run = run_pipeline(&cfg)?;
    summarize(&cfg, &run);
    Ok(())
}

pub fn vote_count(args: &AnalysisArgs) -> anyhow::Result<()> {
    let mut cfg = args.run_config(MethodKind::VoteCount)?;
    if cfg.method != MethodKind::VoteCount {
        if args.method.is_some() {
            bail!(UsageError("vote-count always uses --method vote_count".into()));
        }
        cfg.method = MethodKind::VoteCount;
    }
    let run = run_pipeline(&cfg)?;
    summarize(&cfg, &run);
    Ok(())
}

pub fn select_r(args: &AnalysisArgs) -> anyhow::Result<()> {
    let mut cfg = args.run_config(MethodKind::Rop)?;
    if !matches!(cfg.method, MethodKind::Rop | MethodKind::RopOneSided) {
        bail!(UsageError("select-r applies to rop and rop_one_sided only".into()));
    }
    // Selection itself needs neither a fixed r nor a mode.
    cfg.r = Some(1);
    cfg.auto_r = None;
    cfg.validate()?;
    let loaded = load_input(&cfg)?;
    let matrix = loaded.matrix();
    let plan =
        PermutationPlan::new(cfg.shuffle_permutations, cfg.seed, PermutationScope::PvaluesAcrossGenesWithinStudy)?;
    let counts = select_r_by_count(matrix, &plan, cfg.fdr)?;
    let committee = match &cfg.gene_sets {
        Some(path) => {
            let sets = io::load_gmt(path)?.restrict(matrix.genes(), cfg.min_set_size, cfg.max_set_size);
            info!("{} gene sets usable after restriction", sets.len());
            Some(select_r_by_pathway(matrix, &sets, cfg.top_pathways, cfg.sequential_sides)?)
        }
        None => None,
    };

    let dir = &cfg.output_dir;
    let mut out = OutputSet::new();
    out.write(&dir.join(COUNT_DIAGNOSTICS), &io::count_diagnostics_table(&counts))?;
    if let Some(c) = &committee {
        out.write(&dir.join(PATHWAY_DIAGNOSTICS), &io::committee_table(c))?;
        let report = diagnostics_report(&counts, Some(c))?;
        out.write(&dir.join(ENRICHMENT_SUMMARY), &io::enrichment_table(&report))?;
    }
    out.commit();

    print!("{}", io::count_diagnostics_table(&counts));
    println!("selected_r_counts\t{}", counts.selected_r_counts);
    if let Some(c) = &committee {
        println!("selected_r_pathways\t{}", c.selected_r_pathways);
    }
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            let mut set = OutputSet::new();
            set.write(p, text)?;
            set.commit();
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn power(args: &PowerArgs) -> anyhow::Result<()> {
    if let Some(single) = args.vote_counting {
        let mut text = String::from("k\tvote_counting_power\tcount_power\n");
        for &k in &args.ks {
            let vc = vote_counting_power(k, single, VoteCriterion::Proportion { pi0: args.fraction })?;
            let cp = count_power(k, args.count_success, args.fraction)?;
            text.push_str(&format!("{k}\t{}\t{}\n", io::fmt_num(vc), io::fmt_num(cp)));
        }
        return emit(&text, args.out.as_deref());
    }
    let sweep = match (args.sweep.as_str(), args.r0, args.r) {
        ("r", Some(r0), None) => Sweep::R { r0 },
        ("r0", None, Some(r)) => Sweep::R0 { r },
        ("r", _, _) => bail!(UsageError("--sweep r needs --r0 (and no --r)".into())),
        _ => bail!(UsageError("--sweep r0 needs --r (and no --r0)".into())),
    };
    let mut points = Vec::new();
    for &bp in &args.beta_prime {
        points.extend(power_curve(args.k, sweep, args.alpha, bp)?);
    }
    emit(&io::power_table(&points), args.out.as_deref())
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<BenchConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None if args.full => BenchConfig { sim: SimConfig::default(), ..BenchConfig::default() },
        None => BenchConfig::default(),
    };
    if let Some(n) = args.replicates {
        cfg.replicates = n;
    }
    if let Some(s) = args.seed {
        cfg.sim.seed = s;
    }
    info!("running {} replicates of {} genes x {} studies", cfg.replicates, cfg.sim.n_genes, cfg.sim.n_studies);
    let report = run_benchmark(&cfg)?;

    let dir = &args.out;
    let mut out = OutputSet::new();
    let summary = io::bench_table(&report);
    out.write(&dir.join("bench.tsv"), &summary)?;
    out.write(&dir.join("per_tg_power.tsv"), &io::per_tg_table(&report))?;
    if let Some(s) = io::stability_table(&report) {
        out.write(&dir.join("r_stability.tsv"), &s)?;
    }
    out.write(&dir.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    out.commit();
    print!("{summary}");
    Ok(())
}
