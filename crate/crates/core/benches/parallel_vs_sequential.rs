use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dfs_core::desk::{self, DeskInstance};
use dfs_core::parallel::is_parallel_available;
use dfs_core::{generate_with, rasterize_with, Execution};
use std::hint::black_box;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut m = vec![("sequential", Execution::Sequential)];
    if is_parallel_available() {
        m.push(("parallel", Execution::Parallel));
    }
    m
}

fn bench(c: &mut Criterion) {
    let inst = DeskInstance::with(Some(desk::NOISE), Execution::Sequential).unwrap();
    let x = inst.x_hat.values();

    let mut g = c.benchmark_group("proximity");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| inst.system.proximity_with(black_box(x), exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("phi_full");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| inst.target.phi_full_with(black_box(x), exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("rasterize");
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rasterize_with(&inst.grid, black_box(&inst.phantom), exec))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("generate");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_with(&inst.grid, &inst.geometry, &inst.phantom, Some(desk::NOISE), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
