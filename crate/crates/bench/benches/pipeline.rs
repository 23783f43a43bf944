use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use singext::suite::{bump_map, degree_map};
use singext::{
    gagliardo_energy, gap_potential, run_pipeline, Calibration, ConvolutionExtension, HalfSpacePoint, Oscillation,
    QuadratureSpec, RunConfig, TailMode,
};

const SHIPPED_CALIBRATION: &str = include_str!("../../../calibration.txt");

fn energies(c: &mut Criterion) {
    let u = degree_map(1, 1024).unwrap();
    let quad = QuadratureSpec::new(512, 0.0, TailMode::AnalyticConstantTail).unwrap();
    c.bench_function("gagliardo_energy_512", |b| b.iter(|| gagliardo_energy(black_box(&u), 2.0, &quad).unwrap()));
    c.bench_function("gap_potential_512", |b| b.iter(|| gap_potential(black_box(&u), 0.125, &quad).unwrap()));
}

fn pointwise(c: &mut Criterion) {
    let u = bump_map(0.5, 1024).unwrap();
    let quad = QuadratureSpec::default();
    let osc = Oscillation::new(1, &quad).unwrap();
    let ext = ConvolutionExtension::new(1, &quad).unwrap();
    let x = HalfSpacePoint::new([0.3, 0.0], 0.1).unwrap();
    c.bench_function("mean_oscillation", |b| b.iter(|| osc.mo(&u, black_box(&x), 0.125, 2.0).unwrap()));
    c.bench_function("extension_gradient", |b| b.iter(|| ext.gradient(&u, black_box(&x)).unwrap()));
}

fn small_pipeline(c: &mut Criterion) {
    let cal = Calibration::parse(SHIPPED_CALIBRATION).unwrap();
    let cfg = RunConfig { grid_n: 256, pair_resolution: 128, max_cells: 64, ..RunConfig::default() };
    let u = degree_map(1, cfg.grid_n).unwrap();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("degree1_256", |b| b.iter(|| run_pipeline(black_box(&u), &cfg, &cal).unwrap().lambda));
    group.finish();
}

criterion_group!(benches, energies, pointwise, small_pipeline);
criterion_main!(benches);
