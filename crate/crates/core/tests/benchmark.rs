//! Benchmark-level invariants at reduced scale.

use rop_core::sim::bench::{r_stability, run_benchmark, BenchConfig, BenchMethod, Correction};
use rop_core::sim::{generate_dataset, SimConfig};
use rop_core::MetaMethod;

fn desk(seed: u64) -> BenchConfig {
    BenchConfig { sim: SimConfig { seed, ..SimConfig::desk() }, ..BenchConfig::default() }
}

#[test]
fn no_de_genes_means_no_false_discoveries() {
    // Under the global null BH controls the chance of any detection at the
    // nominal 5%, so allow binomial noise around 95% clean replicates.
    let mut cfg = BenchConfig { replicates: 100, ..desk(31) };
    cfg.sim.n_de_genes = 0;
    cfg.stability_r.clear();
    let report = run_benchmark(&cfg).unwrap();
    for m in &report.methods {
        let dirty = m.replicates.iter().filter(|s| s.detected > 0).count();
        assert!(dirty <= 11, "{}: {dirty}/100 replicates with detections", m.label);
        assert!(m.power_by_tg.iter().all(|p| *p == 0.0));
    }
}

#[test]
fn correlation_inflates_fdr_spread() {
    let methods = vec![
        BenchMethod::new(MetaMethod::Rop { r: 6 }, Correction::Bh),
        BenchMethod::new(MetaMethod::Fisher, Correction::Bh),
    ];
    let mut cfg = BenchConfig { replicates: 30, stability_r: Vec::new(), methods, ..desk(8) };
    // Strong clustering: half the genes sit in correlated blocks.
    cfg.sim.n_clusters = 50;
    let correlated = run_benchmark(&cfg).unwrap();
    cfg.sim.correlated = false;
    let independent = run_benchmark(&cfg).unwrap();
    let spread = |r: &rop_core::sim::bench::BenchReport| r.methods.iter().map(|m| m.fdr1.sd).sum::<f64>();
    assert!(
        spread(&correlated) > spread(&independent),
        "SD with correlation {} vs without {}",
        spread(&correlated),
        spread(&independent)
    );
}

#[test]
fn neighbouring_r_detections_overlap() {
    let table = r_stability(&desk(12), &[5, 6, 7]).unwrap();
    let down = table.get(6, 5).unwrap();
    let up = table.get(6, 7).unwrap();
    assert_eq!(table.get(6, 6), Some(1.0));
    assert!(down > up && up > 0.6, "overlap 6->5 {down}, 6->7 {up}");
}

#[test]
fn reports_are_reproducible() {
    let mut cfg = desk(4);
    cfg.replicates = 3;
    let a = run_benchmark(&cfg).unwrap();
    let b = run_benchmark(&cfg).unwrap();
    assert_eq!(a, b);
    for m in &a.methods {
        for s in &m.replicates {
            assert!((0.0..=1.0).contains(&s.fdr1) && (0.0..=1.0).contains(&s.fdr2));
            assert!(s.fdr2 >= s.fdr1);
            assert!(s.detected <= cfg.sim.n_genes);
        }
    }
}

#[test]
fn true_de_counts_are_uniform() {
    // 1000 DE genes over t_g in 1..=10: each count is Binomial(1000, 0.1).
    let cfg = SimConfig { n_genes: 1500, n_clusters: 0, n_cases: 3, n_controls: 3, correlated: false, seed: 21, ..SimConfig::default() };
    let (_, truth) = generate_dataset(&cfg).unwrap();
    let mut counts = [0usize; 11];
    for t in &truth.t_g {
        counts[*t] += 1;
    }
    assert_eq!(counts[0], 500);
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - 100.0).powi(2) / 100.0).sum();
    // 99.9% quantile of chi-square with 9 degrees of freedom.
    assert!(chi2 < 27.88, "counts {counts:?}, chi2 {chi2}");
}
