//! Invariants of the combination, multiplicity and serialization layers.

use proptest::prelude::*;

use rop_core::combine::{combine_matrix, combine_rop, combine_rop_one_sided, combine_row, effective_mask, MetaMethod};
use rop_core::io::{read_gene_table, write_gene_table};
use rop_core::kernel::binomial_sf;
use rop_core::significance::{bh_adjust, by_adjust, pool_pvalues};
use rop_core::{NullPool, Orientation, PValueMatrix, VoteMode};

fn pvalue() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(1.0), 1 => 1e-12..1e-4f64, 8 => 1e-6..1.0f64]
}

fn row(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    k.prop_flat_map(|k| prop::collection::vec(pvalue(), k))
}

fn methods(k: usize) -> Vec<MetaMethod> {
    let mut m: Vec<MetaMethod> = (1..=k).map(|r| MetaMethod::Rop { r }).collect();
    m.extend([
        MetaMethod::Fisher,
        MetaMethod::Stouffer,
        MetaMethod::MinP,
        MetaMethod::MaxP,
        MetaMethod::VoteCount { alpha: 0.05, pi0: 0.5, mode: VoteMode::Exceedance },
    ]);
    m
}

proptest! {
    #[test]
    fn meta_p_in_unit_interval(p in row(2..=12)) {
        for m in methods(p.len()) {
            let (c, _) = combine_row(&m, &p, None).unwrap();
            prop_assert!((0.0..=1.0).contains(&c.meta_p), "{}: {}", m.label(), c.meta_p);
        }
    }

    #[test]
    fn lowering_a_pvalue_never_raises_meta_p(p in row(2..=10), idx in 0usize..10, shrink in 0.0..1.0f64) {
        let i = idx % p.len();
        let mut q = p.clone();
        q[i] *= shrink;
        q[i] = q[i].max(1e-300);
        for m in methods(p.len()) {
            let before = combine_row(&m, &p, None).unwrap().0.meta_p;
            let after = combine_row(&m, &q, None).unwrap().0.meta_p;
            prop_assert!(after <= before * (1.0 + 1e-12) + 1e-15, "{}: {} -> {}", m.label(), before, after);
        }
    }

    #[test]
    fn study_order_is_irrelevant(p in row(2..=10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut q = p.clone();
        q.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        for m in methods(p.len()) {
            let a = combine_row(&m, &p, None).unwrap().0;
            let b = combine_row(&m, &q, None).unwrap().0;
            prop_assert!((a.meta_p - b.meta_p).abs() <= 1e-12 * a.meta_p.max(1e-300), "{}", m.label());
            prop_assert!((a.statistic - b.statistic).abs() <= 1e-12 * a.statistic.abs().max(1e-300));
        }
    }

    #[test]
    fn rop_matches_binomial_tail(p in row(2..=15), r_seed in any::<usize>()) {
        // P(p_(r) <= x) = P(BIN(K, x) >= r) under the null.
        let k = p.len();
        let r = 1 + r_seed % k;
        let c = combine_rop(&p, r).unwrap();
        let oracle = binomial_sf(r as u64, k as u64, c.statistic).unwrap();
        prop_assert!((c.meta_p - oracle).abs() <= 1e-10 * oracle.max(1e-300) + 1e-300);
    }

    #[test]
    fn mask_selects_exactly_r_studies_at_or_below_statistic(p in row(2..=12), r_seed in any::<usize>()) {
        let r = 1 + r_seed % p.len();
        let mask = effective_mask(&p, r).unwrap();
        let stat = combine_rop(&p, r).unwrap().statistic;
        prop_assert_eq!(mask.iter().filter(|b| **b).count(), r);
        for (m, v) in mask.iter().zip(&p) {
            if *m {
                prop_assert!(*v <= stat);
            } else {
                prop_assert!(*v >= stat);
            }
        }
    }

    #[test]
    fn one_sided_rop_bounds(left in row(3..=8), r_seed in any::<usize>()) {
        let k = left.len();
        let r = 1 + r_seed % k;
        let right: Vec<f64> = left.iter().map(|p| 1.0 - p).collect();
        let one = combine_rop_one_sided(&left, &right, r).unwrap();
        let l = combine_rop(&left, r).unwrap().meta_p;
        let rr = combine_rop(&right, r).unwrap().meta_p;
        prop_assert!(one.meta_p <= 1.0);
        prop_assert!((one.meta_p - (2.0 * l.min(rr)).min(1.0)).abs() <= 1e-12);
    }

    #[test]
    fn bh_is_monotone_and_dominates(p in prop::collection::vec(pvalue(), 1..200)) {
        for q in [bh_adjust(&p), by_adjust(&p)] {
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            for w in order.windows(2) {
                prop_assert!(q[w[0]] <= q[w[1]] + 1e-15);
            }
            for (qi, pi) in q.iter().zip(&p) {
                prop_assert!(*qi >= *pi - 1e-15 && *qi <= 1.0);
            }
        }
        let bh = bh_adjust(&p);
        for (a, b) in bh.iter().zip(by_adjust(&p)) {
            prop_assert!(b >= *a - 1e-15);
        }
    }

    #[test]
    fn pooled_qvalues_monotone(obs in prop::collection::vec(0.0..1.0f64, 5..60), null in prop::collection::vec(0.0..1.0f64, 100..300)) {
        let b = null.len() / obs.len();
        let used = b * obs.len();
        let pool = NullPool::new(null[..used].to_vec(), obs.len(), b, Orientation::SmallIsSignificant).unwrap();
        let (p, q) = pool_pvalues(&obs, &pool).unwrap();
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &c| obs[a].total_cmp(&obs[c]));
        for w in order.windows(2) {
            prop_assert!(p[w[0]] <= p[w[1]]);
            prop_assert!(q[w[0]] <= q[w[1]] + 1e-15);
        }
        for (pi, qi) in p.iter().zip(&q) {
            prop_assert!(*pi > 0.0 && *pi <= 1.0 && *qi <= 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gene_table_round_trips(values in prop::collection::vec(pvalue(), 12), q in prop::collection::vec(prop::option::of(0.0..1.0f64), 4)) {
        let genes: Vec<String> = (0..4).map(|i| format!("g{i}")).collect();
        let studies: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        let m = PValueMatrix::new(genes, studies, values).unwrap();
        let mut res = combine_matrix(&m, &MetaMethod::Rop { r: 2 }).unwrap();
        for (rec, q) in res.records.iter_mut().zip(q) {
            rec.q_value = q;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("genes.tsv");
        write_gene_table(&path, &res).unwrap();
        let back = read_gene_table(&path).unwrap();
        prop_assert_eq!(back.len(), res.records.len());
        for rec in &res.records {
            let b = back.iter().find(|x| x.gene == rec.gene).unwrap();
            prop_assert_eq!(b, rec);
        }
    }
}
