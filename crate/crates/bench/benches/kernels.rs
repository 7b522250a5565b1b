use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use terrace_core::ode::{displacement, scan_fixed_points, IntegratorSettings};
use terrace_core::pde::{heaviside_ic, Grid1D, Tridiagonal};
use terrace_core::signs::{sgn_word, zero_number};
use terrace_core::terrace::level_position;
use terrace_core::{build_preset, OdeSettings, Solver, SolverConfig};

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn thomas(c: &mut Criterion) {
    let n = 20_000;
    let r = 0.4;
    let t = Tridiagonal::factor(&vec![-r; n], &vec![1.0 + 2.0 * r; n], &vec![-r; n]).unwrap();
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 1e-3).sin()).collect();
    c.bench_function("thomas_solve_20k", |b| {
        b.iter(|| {
            let mut x = rhs.clone();
            t.solve_in_place(&mut x);
            black_box(x)
        })
    });
}

fn period_map(c: &mut Criterion) {
    let f = build_preset("threestable_paper", &params(&[])).unwrap();
    let ctrl = IntegratorSettings::default();
    c.bench_function("displacement_threestable_beta_3.5", |b| {
        b.iter(|| displacement(&f, black_box(3.5), &ctrl).unwrap())
    });
    let g = build_preset("bistable_cubic", &params(&[("theta", 0.25), ("amplitude", 0.5)])).unwrap();
    c.bench_function("ladder_scan_bistable_256", |b| {
        b.iter(|| scan_fixed_points(&g, 256, &OdeSettings::default()).unwrap())
    });
}

fn pde_period(c: &mut Criterion) {
    let f = build_preset("bistable_cubic", &params(&[("theta", 0.25)])).unwrap();
    let grid = Grid1D::covering(-20.0, 60.0, 0.05, 0.0).unwrap();
    let ic = heaviside_ic(grid, 0.0, 1.0).unwrap();
    let cfg = SolverConfig {
        h: 0.05,
        ..Default::default()
    };
    let ctrl = IntegratorSettings::default();
    let mut group = c.benchmark_group("pde");
    group.sample_size(10);
    group.bench_function("bistable_one_period_h005", |b| {
        b.iter_batched(
            || Solver::new(&f, cfg.clone(), ic.clone(), 1.0, &ctrl).unwrap(),
            |mut s| {
                s.advance_period(0).unwrap();
                s
            },
            criterion::BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn measurements(c: &mut Criterion) {
    let grid = Grid1D::covering(-20.0, 60.0, 0.02, 0.0).unwrap();
    let values: Vec<f64> = (0..grid.n).map(|i| 1.0 / (1.0 + (grid.x(i) - 17.3).exp())).collect();
    let p = terrace_core::GridProfile::new(grid, 0.0, values.clone()).unwrap();
    c.bench_function("level_position_4k", |b| b.iter(|| level_position(&p, black_box(0.37)).unwrap()));
    let wiggle: Vec<f64> = values.iter().enumerate().map(|(i, v)| v - 0.5 + 0.01 * (i as f64 * 0.05).sin()).collect();
    c.bench_function("zero_number_4k", |b| b.iter(|| zero_number(black_box(&wiggle), 1e-9)));
    c.bench_function("sgn_word_4k", |b| b.iter(|| sgn_word(black_box(&wiggle), 1e-9)));
}

criterion_group!(benches, thomas, period_map, pde_period, measurements);
criterion_main!(benches);
