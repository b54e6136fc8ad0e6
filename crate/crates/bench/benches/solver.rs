use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ratiodual::oracle::grid_minimize_p0;
use ratiodual::solver::{maximize_dual, solve, SolverOptions};
use ratiodual_bench::{generated, instance_a};

fn dual_ascent(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("maximize_dual");
    for n in [1, 4, 16] {
        let p = generated(n, 7);
        let iv = p.mu_interval();
        let mu = 0.5 * (iv.mu0 + iv.mu_max);
        group.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| maximize_dual(p, black_box(mu), &opts))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    group.bench_function("instance_a", |b| {
        b.iter(|| solve(black_box(&instance_a()), &opts))
    });
    for n in [2, 6] {
        let p = generated(n, 7);
        group.bench_with_input(BenchmarkId::new("generated", n), &p, |b, p| {
            b.iter(|| solve(p, &opts))
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    let p = generated(2, 7);
    group.bench_function("n2_res1e-2", |b| {
        b.iter(|| grid_minimize_p0(&p, black_box(1e-2), 0))
    });
    group.finish();
}

criterion_group!(benches, dual_ascent, sweep, oracle);
criterion_main!(benches);
