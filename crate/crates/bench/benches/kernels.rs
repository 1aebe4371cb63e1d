use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};

use rop_core::kernel::{beta_cdf, beta_quantile, welch_t_test, Sides};
use rop_core::power::{rop_power_equal, rop_power_poisson_binomial, Effect, PowerSpec};
use rop_core::significance::bh_adjust;
use rop_core::{combine_matrix, MetaMethod, PValueMatrix};

fn uniform_matrix(g: usize, k: usize) -> PValueMatrix {
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    PValueMatrix::new(
        (0..g).map(|i| format!("g{i}")).collect(),
        (0..k).map(|i| format!("s{i}")).collect(),
        (0..g * k).map(|_| rng.random::<f64>()).collect(),
    )
    .unwrap()
}

fn distributions(c: &mut Criterion) {
    c.bench_function("beta_cdf(6,5)", |b| b.iter(|| beta_cdf(black_box(0.37), 6.0, 5.0)));
    c.bench_function("beta_quantile(6,5)", |b| b.iter(|| beta_quantile(black_box(0.05), 6.0, 5.0)));
    let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
    let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos() + 0.2).collect();
    c.bench_function("welch_t_test 50v50", |b| b.iter(|| welch_t_test(black_box(&x), black_box(&y), Sides::Two)));
}

fn combination(c: &mut Criterion) {
    let m = uniform_matrix(10_000, 10);
    let mut group = c.benchmark_group("combine_matrix 10000x10");
    for method in [MetaMethod::Rop { r: 6 }, MetaMethod::Fisher, MetaMethod::Stouffer, MetaMethod::MaxP] {
        group.bench_with_input(BenchmarkId::from_parameter(method.label()), &method, |b, method| {
            b.iter(|| combine_matrix(&m, method).unwrap())
        });
    }
    group.finish();
    let p = combine_matrix(&m, &MetaMethod::Rop { r: 6 }).unwrap().meta_p();
    c.bench_function("bh_adjust 10000", |b| b.iter(|| bh_adjust(black_box(&p))));
}

fn power(c: &mut Criterion) {
    let spec = PowerSpec::equal(50, 30, 35, 0.05, 0.8);
    c.bench_function("rop_power_equal K=50", |b| b.iter(|| rop_power_equal(black_box(&spec))));
    let probs: Vec<f64> = (0..50).map(|i| 0.05 + 0.9 * i as f64 / 49.0).collect();
    let uneq = PowerSpec { effect: Effect::Unequal { success_probs: probs }, ..spec };
    c.bench_function("rop_power_poisson_binomial K=50", |b| b.iter(|| rop_power_poisson_binomial(black_box(&uneq))));
}

criterion_group!(benches, distributions, combination, power);
criterion_main!(benches);
