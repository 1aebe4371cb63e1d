//! Distribution and test kernels against independent references: statrs for
//! the continuous families, brute-force enumeration for the exact nulls.

use rop_core::kernel::{
    beta_cdf, beta_quantile, binomial_pmf, binomial_sf, chisq_sf, ks_two_sample, std_normal_cdf,
    std_normal_quantile, student_t_sf, welch_outcome, wilcoxon_signed_rank, Sides,
};
use statrs::distribution::{Beta, Binomial, ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Normal, StudentsT};

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs.max(rel * b.abs())
}

#[test]
fn beta_cdf_matches_statrs() {
    let shapes = [(1.0, 1.0), (0.5, 0.5), (1.0, 10.0), (6.0, 5.0), (3.0, 98.0), (50.0, 51.0), (0.1, 1.0)];
    for &(a, b) in &shapes {
        let oracle = Beta::new(a, b).unwrap();
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let ours = beta_cdf(x, a, b).unwrap();
            let theirs = oracle.cdf(x);
            assert!(close(ours, theirs, 1e-9, 1e-13), "Beta({a},{b}) at {x}: {ours} vs {theirs}");
        }
    }
}

#[test]
fn beta_quantile_inverts_statrs_cdf() {
    for &(a, b) in &[(1.0, 5.0), (6.0, 5.0), (2.0, 9.0), (10.0, 1.0), (0.5, 0.5)] {
        let oracle = Beta::new(a, b).unwrap();
        for &p in &[1e-8, 1e-4, 0.01, 0.05, 0.5, 0.95, 0.99] {
            let x = beta_quantile(p, a, b).unwrap();
            assert!(close(oracle.cdf(x), p, 1e-8, 1e-14), "Beta({a},{b}) quantile {p}: x={x}");
        }
    }
}

#[test]
fn chisq_sf_matches_statrs() {
    for &df in &[1.0, 2.0, 5.0, 10.0, 20.0, 100.0] {
        let oracle = ChiSquared::new(df).unwrap();
        for &x in &[0.01, 0.5, 1.0, 3.0, 10.0, 25.0, 60.0, 120.0] {
            let ours = chisq_sf(x, df).unwrap();
            let theirs = oracle.sf(x);
            assert!(close(ours, theirs, 1e-8, 1e-15), "chisq df={df} x={x}: {ours} vs {theirs}");
        }
    }
}

#[test]
fn normal_matches_statrs() {
    let oracle = Normal::new(0.0, 1.0).unwrap();
    for i in -80..=80 {
        let z = i as f64 / 10.0;
        assert!(close(std_normal_cdf(z), oracle.cdf(z), 1e-9, 1e-15), "Phi({z})");
    }
    for &p in &[1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.8, 0.999] {
        let z = std_normal_quantile(p).unwrap();
        assert!(close(z, oracle.inverse_cdf(p), 1e-8, 1e-10), "quantile {p}");
    }
}

#[test]
fn student_t_matches_statrs() {
    for &df in &[1.0, 2.5, 7.0, 30.0, 97.3] {
        let oracle = StudentsT::new(0.0, 1.0, df).unwrap();
        for &t in &[-4.0, -1.0, 0.0, 0.7, 2.0, 6.0] {
            let ours = student_t_sf(t, df).unwrap();
            assert!(close(ours, oracle.sf(t), 1e-8, 1e-14), "t df={df} at {t}");
        }
    }
}

#[test]
fn binomial_matches_statrs() {
    for &(n, p) in &[(10u64, 0.05), (50, 0.3), (200, 0.5), (7, 0.9)] {
        let oracle = Binomial::new(p, n).unwrap();
        for k in 0..=n {
            assert!(close(binomial_pmf(k, n, p).unwrap(), oracle.pmf(k), 1e-9, 1e-300), "pmf {k} {n} {p}");
            // binomial_sf(k) is P(X >= k).
            let theirs = if k == 0 { 1.0 } else { oracle.sf(k - 1) };
            assert!(close(binomial_sf(k, n, p).unwrap(), theirs, 1e-8, 1e-14), "sf {k} {n} {p}");
        }
    }
}

#[test]
fn welch_matches_hand_formula() {
    let a = [5.1, 4.9, 6.2, 5.8, 6.0, 5.5];
    let b = [4.0, 4.4, 3.9, 5.0, 4.6];
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let var = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
    };
    let (va, vb) = (var(&a) / 6.0, var(&b) / 5.0);
    let t = (mean(&a) - mean(&b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / 5.0 + vb * vb / 4.0);
    let oracle = StudentsT::new(0.0, 1.0, df).unwrap();
    let w = welch_outcome(&a, &b).unwrap();
    assert!(close(w.t, t, 1e-12, 0.0));
    assert!(close(w.df, df, 1e-12, 0.0));
    assert!(close(w.p_right, oracle.sf(t), 1e-8, 1e-15));
    assert!(close(w.p_left, oracle.cdf(t), 1e-8, 1e-15));
}

/// Two-sample KS p-value by enumerating every split of the pooled sample.
fn ks_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, m) = (a.len(), b.len());
    let d_of = |xs: &[f64], ys: &[f64]| {
        let mut d: f64 = 0.0;
        for &t in &pooled {
            let fa = xs.iter().filter(|&&v| v <= t).count() as f64 / xs.len() as f64;
            let fb = ys.iter().filter(|&&v| v <= t).count() as f64 / ys.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    };
    let observed = d_of(a, b);
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << (n + m)) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let xs: Vec<f64> = (0..n + m).filter(|i| mask >> i & 1 == 1).map(|i| pooled[i]).collect();
        let ys: Vec<f64> = (0..n + m).filter(|i| mask >> i & 1 == 0).map(|i| pooled[i]).collect();
        total += 1;
        if d_of(&xs, &ys) >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

#[test]
fn ks_exact_matches_enumeration() {
    let cases: [(&[f64], &[f64]); 4] = [
        (&[1.0, 2.0, 3.0, 4.0, 5.0], &[6.0, 7.0, 8.0, 9.0, 10.0]),
        (&[0.3, 1.7, 2.2, 5.1, 6.0], &[0.9, 1.1, 4.0, 4.4, 7.5]),
        (&[0.5, 2.5, 3.5, 9.0], &[1.0, 1.5, 2.0, 3.0, 4.0, 8.0]),
        (&[3.3, 0.2, 7.7], &[1.1, 2.2, 4.4, 5.5, 6.6, 8.8, 9.9]),
    ];
    for (a, b) in cases {
        let ours = ks_two_sample(a, b).unwrap();
        assert!(ours.exact);
        let truth = ks_enumerated(a, b);
        assert!(close(ours.p_value, truth, 1e-10, 1e-12), "{a:?} vs {b:?}: {} vs {truth}", ours.p_value);
    }
    let sep = ks_two_sample(&[1.0, 2.0, 3.0, 4.0, 5.0], &[6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
    assert!(close(sep.p_value, 2.0 / 252.0, 1e-12, 0.0));
}

/// Signed-rank tails by enumerating all 2^n sign assignments.
fn signed_rank_enumerated(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let observed: usize = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| rank[i]).sum();
    let (mut up, mut down) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: usize = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| rank[i]).sum();
        if w >= observed {
            up += 1;
        }
        if w <= observed {
            down += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (up as f64 / total, down as f64 / total)
}

#[test]
fn wilcoxon_exact_matches_enumeration() {
    let samples: [[f64; 10]; 3] = [
        [1.2, -0.4, 2.3, 0.8, -1.9, 3.1, 0.05, 1.7, -0.6, 2.8],
        [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
        [-1.5, 0.25, -2.5, 0.35, -0.45, 1.05, -3.2, 0.15, -0.95, 2.05],
    ];
    for d in samples {
        let zeros = [0.0; 10];
        let (up, down) = signed_rank_enumerated(&d);
        let right = wilcoxon_signed_rank(&d, &zeros, Sides::Right).unwrap();
        let left = wilcoxon_signed_rank(&d, &zeros, Sides::Left).unwrap();
        let two = wilcoxon_signed_rank(&d, &zeros, Sides::Two).unwrap();
        assert!(right.exact);
        assert!(close(right.p_value, up, 1e-12, 0.0), "{d:?}");
        assert!(close(left.p_value, down, 1e-12, 0.0), "{d:?}");
        assert!(close(two.p_value, (2.0 * up.min(down)).min(1.0), 1e-12, 0.0), "{d:?}");
    }
}
