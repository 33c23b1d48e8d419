use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use slsblend_bench::{chain_setup, three_state_setup};
use slsblend_core::controller::{aw_step, sl_step};
use slsblend_core::sim::{gen_disturbance, simulate, DistributedController, DisturbanceGen, SimConfig};
use slsblend_core::{synthesize_blend, AntiWindupController, Controller, ProjectionKind, SlController};

fn three_state(c: &mut Criterion) {
    let setup = three_state_setup(10);
    let blend = synthesize_blend(&setup, &[0.05, 0.1, 0.2, 1.0], ProjectionKind::Radial).unwrap().blend;
    let x = DVector::from_vec(vec![0.3, -0.7, 1.4]);
    let mut g = c.benchmark_group("three-state-step");
    let mut sl = SlController::new(blend.clone());
    g.bench_function("sl", |b| b.iter(|| sl_step(&mut sl, black_box(&x)).unwrap()));
    let mut aw = AntiWindupController::new(blend, setup.sys.a(), 2).unwrap();
    g.bench_function("anti-windup", |b| b.iter(|| aw_step(&mut aw, black_box(&x)).unwrap()));
    g.finish();
}

fn chain(c: &mut Criterion) {
    let (setup, mask) = chain_setup(20, 20);
    let blend = synthesize_blend(&setup, &[0.2, 1.0], ProjectionKind::Saturation).unwrap().blend;
    let steps = 400;
    let w = gen_disturbance(&DisturbanceGen::WorstCaseBang { eta: 1.0, period: 40, nodes: None }, steps, 20, 0).unwrap();
    let cfg = SimConfig::new(setup.sys.clone(), steps).saturated(3.0);
    let mut g = c.benchmark_group("chain-400-steps");
    g.sample_size(10);
    g.bench_function("anti-windup", |b| {
        b.iter(|| {
            let mut ctrl = AntiWindupController::new(blend.clone(), setup.sys.a(), 2).unwrap();
            simulate(&cfg, &mut ctrl, black_box(&w)).unwrap()
        })
    });
    g.bench_function("distributed", |b| {
        b.iter(|| {
            let mut ctrl: Box<dyn Controller> = Box::new(DistributedController::new(&blend, &mask, Some((setup.sys.a(), 2))).unwrap());
            simulate(&cfg, ctrl.as_mut(), black_box(&w)).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, three_state, chain);
criterion_main!(benches);
