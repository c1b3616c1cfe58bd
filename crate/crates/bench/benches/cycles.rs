use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lienard_bench::staircase_k2;
use lienard_core::cubic::analyze_distribution;
use lienard_core::cycles::{find_cycles, return_map, GridSpec};
use lienard_core::integrate::IntegratorConfig;

fn return_maps(c: &mut Criterion) {
    let (inst, section) = staircase_k2();
    let cfg = IntegratorConfig::verification();
    c.bench_function("return_map k=2 s=0.5", |b| {
        b.iter(|| return_map(&inst, &section, black_box(0.5), &cfg).unwrap())
    });
}

fn cycle_search(c: &mut Criterion) {
    let (inst, section) = staircase_k2();
    let cfg = IntegratorConfig::verification();
    let grid = GridSpec::default();
    let mut g = c.benchmark_group("search");
    g.sample_size(10);
    g.bench_function("find_cycles k=2", |b| {
        b.iter(|| find_cycles(&inst, &section, &grid, &cfg).unwrap())
    });
    let sweep = IntegratorConfig::sweep();
    g.bench_function("cubic distribution", |b| {
        b.iter(|| analyze_distribution(black_box(-1.99), -2.0, 1.0, &grid, &sweep).unwrap())
    });
    g.finish();
}

criterion_group!(benches, return_maps, cycle_search);
criterion_main!(benches);
