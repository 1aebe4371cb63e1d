//! Generator properties and null calibration of the per-study tests.

use rop_core::sim::{generate_dataset, SimConfig};
use rop_core::study::{de_test_all, DeMode};
use rop_core::Study;

fn base(correlated: bool) -> SimConfig {
    SimConfig {
        n_genes: 600,
        n_clusters: 10,
        cluster_size: 20,
        n_studies: 3,
        n_cases: 40,
        n_controls: 40,
        n_de_genes: 60,
        correlated,
        seed: 5,
        ..SimConfig::default()
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn controls(study: &Study, g: usize) -> Vec<f64> {
    study.expression_row(g).iter().zip(study.labels()).filter(|(_, case)| !**case).map(|(v, _)| *v).collect()
}

/// Mean absolute correlation within clusters and between unclustered genes.
fn correlation_summary(cfg: &SimConfig) -> (f64, f64) {
    let (set, truth) = generate_dataset(cfg).unwrap();
    let study = &set.studies()[0];
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    let free: Vec<usize> = (0..cfg.n_genes).filter(|&g| truth.cluster[g].is_none()).take(40).collect();
    for a in 0..cfg.n_genes {
        for b in a + 1..cfg.n_genes {
            if let (Some(x), Some(y)) = (truth.cluster[a], truth.cluster[b]) {
                if x == y {
                    within += pearson(&controls(study, a), &controls(study, b)).abs();
                    nw += 1;
                }
            }
        }
    }
    for (i, &a) in free.iter().enumerate() {
        for &b in &free[i + 1..] {
            between += pearson(&controls(study, a), &controls(study, b)).abs();
            nb += 1;
        }
    }
    (within / nw as f64, between / nb as f64)
}

#[test]
fn clusters_are_correlated_only_when_requested() {
    let (within, between) = correlation_summary(&base(true));
    // |r| of independent normals with n = 40 averages about 0.13.
    assert!(between < 0.16, "unclustered genes |r| {between}");
    assert!(within > between + 0.05, "within-cluster |r| {within} vs {between}");
    let (within_off, _) = correlation_summary(&base(false));
    assert!(within_off < 0.16, "uncorrelated config still shows |r| {within_off}");
}

#[test]
fn null_gene_pvalues_are_uniform() {
    let cfg = SimConfig { correlated: false, n_genes: 3000, n_de_genes: 300, ..base(false) };
    let (set, truth) = generate_dataset(&cfg).unwrap();
    let m = de_test_all(&set, DeMode::TwoSided).unwrap();
    let k = cfg.n_studies;
    let mut null: Vec<f64> = (0..cfg.n_genes)
        .flat_map(|g| (0..k).map(move |s| (g, s)))
        .filter(|&(g, s)| !truth.delta[g * k + s])
        .map(|(g, s)| m.row(g)[s])
        .collect();
    null.sort_by(f64::total_cmp);
    let n = null.len() as f64;
    let d = null
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max);
    // Kolmogorov 1% critical value is about 1.63 / sqrt(n).
    assert!(d < 1.63 / n.sqrt(), "KS distance {d} over {n} null p-values");

    let de: Vec<f64> = (0..cfg.n_genes)
        .flat_map(|g| (0..k).map(move |s| (g, s)))
        .filter(|&(g, s)| truth.delta[g * k + s])
        .map(|(g, s)| m.row(g)[s])
        .collect();
    let hit = de.iter().filter(|&&p| p < 0.05).count() as f64 / de.len() as f64;
    assert!(hit > 0.8, "DE share below 0.05 is only {hit}");
}

#[test]
fn one_sided_tails_follow_effect_sign() {
    let cfg = SimConfig { consistent_sign: true, correlated: false, ..base(false) };
    let (set, truth) = generate_dataset(&cfg).unwrap();
    let m = de_test_all(&set, DeMode::OneSidedPair).unwrap();
    let k = cfg.n_studies;
    for g in 0..cfg.n_genes {
        for s in 0..k {
            let (l, r) = (m.row(g)[s], m.right_row(g).unwrap()[s]);
            assert!((l + r - 1.0).abs() < 1e-9);
            let mu = truth.mu[g * k + s];
            if mu >= 0.8 {
                assert!(r < 0.05, "gene {g} study {s} shift {mu} right tail {r}");
            } else if mu <= -0.8 {
                assert!(l < 0.05, "gene {g} study {s} shift {mu} left tail {l}");
            }
        }
    }
}

#[test]
fn seeds_change_data_but_not_shape() {
    let (a, ta) = generate_dataset(&base(true)).unwrap();
    let (b, tb) = generate_dataset(&SimConfig { seed: 6, ..base(true) }).unwrap();
    assert_eq!(a.genes(), b.genes());
    assert_ne!(a.studies()[0].expression_row(0), b.studies()[0].expression_row(0));
    assert_ne!(ta.mu, tb.mu);
    let (a2, ta2) = generate_dataset(&base(true)).unwrap();
    assert_eq!(ta, ta2);
    assert_eq!(a.studies()[2].expression_row(17), a2.studies()[2].expression_row(17));
}
