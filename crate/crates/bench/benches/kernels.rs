use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use sirwave_bench::{bump, reference_specs};
use sirwave_core::pde_sim::{self, SimConfig};
use sirwave_core::wave_profile::WaveSetup;
use sirwave_core::{apply_delta_inverse, Grid};

fn resolvent(c: &mut Criterion) {
    let (_, specs) = reference_specs();
    let h = bump(60.0, 0.05);
    c.bench_function("delta_inverse_2401", |b| b.iter(|| apply_delta_inverse(black_box(&h), &specs[1]).unwrap()));
}

fn f_map(c: &mut Criterion) {
    let (p, _) = reference_specs();
    let grid = Grid::symmetric(60.0, 0.05).unwrap();
    let setup = WaveSetup::new(&p, 2.5, &grid, 1.0).unwrap();
    let f = setup.f_map();
    let u = setup.gamma.midpoint();
    c.bench_function("f_apply_2401", |b| b.iter(|| f.apply(black_box(&u)).unwrap()));
}

fn pde_step(c: &mut Criterion) {
    let (p, _) = reference_specs();
    let grid = Grid::symmetric(200.0, 0.1).unwrap();
    let cfg = SimConfig::new(p, grid, 1.0);
    let state = cfg.initial_state().unwrap();
    c.bench_function("rk4_step_4001", |b| b.iter(|| pde_sim::step(black_box(&state), &cfg).unwrap()));
}

criterion_group!(benches, resolvent, f_map, pde_step);
criterion_main!(benches);
