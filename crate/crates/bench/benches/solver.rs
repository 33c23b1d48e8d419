use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use slsblend_bench::{chain_setup, three_state_setup};
use slsblend_core::synthesis::build_synthesis_qp;
use slsblend_core::{solve, synthesize_blend, ProjectionKind};

fn three_state(c: &mut Criterion) {
    let setup = three_state_setup(10);
    let radii = [0.05, 0.1, 0.2, 1.0];
    let (prob, _, _) = build_synthesis_qp(&setup, &radii).unwrap();
    let mut g = c.benchmark_group("three-state");
    g.sample_size(10);
    g.bench_function("assemble", |b| b.iter(|| build_synthesis_qp(black_box(&setup), &radii).unwrap()));
    g.bench_function("solve", |b| b.iter(|| solve(black_box(&prob), &setup.qp).unwrap()));
    g.bench_function("synthesize", |b| b.iter(|| synthesize_blend(black_box(&setup), &radii, ProjectionKind::Radial).unwrap()));
    g.finish();
}

fn chain(c: &mut Criterion) {
    let (setup, _) = chain_setup(20, 20);
    let radii = [0.2, 1.0];
    let (prob, _, _) = build_synthesis_qp(&setup, &radii).unwrap();
    let mut g = c.benchmark_group("chain");
    g.sample_size(10);
    g.bench_function("solve", |b| b.iter(|| solve(black_box(&prob), &setup.qp).unwrap()));
    g.finish();
}

criterion_group!(benches, three_state, chain);
criterion_main!(benches);
