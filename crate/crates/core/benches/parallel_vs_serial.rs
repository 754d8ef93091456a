//! Data-parallel Monte Carlo engines versus their sequential fallback.
//! `workers = Some(1)` takes the plain-loop path (the same code the crate
//! compiles to without the `parallel` feature); `workers = None` uses the
//! rayon pool. Outputs are identical either way, so the comparison is pure
//! scheduling overhead versus speedup.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pptube::cumulant::UnitDirection;
use pptube::mc::{self, McConfig};
use std::hint::black_box;

fn modes() -> [(&'static str, Option<usize>); 2] {
    [("serial", Some(1)), ("parallel", None)]
}

fn bench_limit_max(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_limit_max_q2");
    group.sample_size(10);
    for (name, workers) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &workers, |b, &workers| {
            let cfg = McConfig {
                reps: 256,
                seed: 7,
                workers,
                grid_resolution: 1024,
                ..McConfig::default()
            };
            b.iter(|| black_box(mc::simulate_limit_max(2, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn bench_finite_max(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_finite_max_q2_n300");
    group.sample_size(10);
    for (name, workers) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &workers, |b, &workers| {
            let cfg = McConfig {
                reps: 64,
                seed: 7,
                workers,
                grid_resolution: 1024,
                ..McConfig::default()
            };
            b.iter(|| black_box(mc::simulate_finite_max(2, 300, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn bench_tube_volume(c: &mut Criterion) {
    let mut group = c.benchmark_group("tube_volume_mc_q2");
    group.sample_size(10);
    for (name, workers) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &workers, |b, &workers| {
            let cfg = McConfig {
                reps: 2000,
                seed: 7,
                workers,
                grid_resolution: 256,
                ..McConfig::default()
            };
            b.iter(|| black_box(mc::tube_volume_mc(2, 0.5, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn bench_clt_marginals(c: &mut Criterion) {
    let mut group = c.benchmark_group("clt_marginal_check_n1000");
    group.sample_size(10);
    let h = UnitDirection::normalized(vec![0.6, -0.8]).unwrap();
    for (name, workers) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &workers, |b, &workers| {
            let cfg = McConfig {
                reps: 500,
                seed: 7,
                workers,
                ..McConfig::default()
            };
            b.iter(|| black_box(mc::clt_marginal_check(2, &h, 1000, &cfg).unwrap()));
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_limit_max,
    bench_finite_max,
    bench_tube_volume,
    bench_clt_marginals
);
criterion_main!(benches);
