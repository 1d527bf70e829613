use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ddim_core::{evolve, evolve_fn, evolve_tangent, quasi_differential, HState, HistoryGrid, SuarezModel};

fn start(sm: &SuarezModel, m: usize) -> HState {
    let g = HistoryGrid::new(sm.tau, m).unwrap();
    let h = sm.tau / m as f64;
    evolve_fn(sm.model(), g, |t| vec![0.3 + 0.5 * (3.0 * t).sin()], 0.0, 10.0, h).unwrap().state_at(10.0).unwrap()
}

fn flows(c: &mut Criterion) {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    for m in [32usize, 128] {
        let v = start(&sm, m);
        let h = 1.0 / m as f64;
        c.bench_function(&format!("evolve T=10 m={m}"), |b| {
            b.iter(|| evolve(sm.model(), black_box(&v), 0.0, 10.0, h).unwrap())
        });
        let base = evolve(sm.model(), &v, 0.0, 2.0, h).unwrap();
        let xi: Vec<HState> =
            (0..3).map(|j| HState::from_scalar_fn(v.grid(), |t| (j as f64 * t).cos()).unwrap()).collect();
        c.bench_function(&format!("tangent k=3 T=2 m={m}"), |b| {
            b.iter(|| evolve_tangent(black_box(&base), &xi, 2.0).unwrap())
        });
    }
    let v = start(&sm, 32);
    let base = evolve(sm.model(), &v, 0.0, 2.0, 1.0 / 32.0).unwrap();
    c.bench_function("quasi-differential m=32", |b| b.iter(|| quasi_differential(black_box(&base), 2.0).unwrap()));
}

criterion_group!(benches, flows);
criterion_main!(benches);
