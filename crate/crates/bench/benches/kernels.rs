use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hipdyn::evolution::{evolve_ket, uniform_times};
use hipdyn::toy::{toy_model, ToyParams, GRID_T};
use hipdyn::verify::{run_toy_suite, SuiteOptions};
use hipdyn::{IntegratorSpec, PictureTag, C64};
use hipdyn_bench::dense;

fn eigenvalues(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigenvalues");
    for n in [2, 4, 8, 16] {
        let m = dense(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| black_box(m).eigenvalues().unwrap()));
    }
    g.finish();
}

fn expm(c: &mut Criterion) {
    let mut g = c.benchmark_group("expm");
    for n in [2, 4, 8] {
        let m = dense(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| black_box(m).expm()));
    }
    g.finish();
}

fn toy_propagation(c: &mut Criterion) {
    let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
    let psi0 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let times = uniform_times(0.0, 1.0, 10);
    let mut g = c.benchmark_group("toy_propagation");
    for (label, spec) in [("rk4_1e-3", IntegratorSpec::rk4(1e-3)), ("dp54_1e-10", IntegratorSpec::dp54(1e-10, 1e-12))] {
        g.bench_function(label, |b| b.iter(|| evolve_ket(&model, PictureTag::HipKphysical, &psi0, &spec, &times).unwrap()));
    }
    g.finish();
}

fn verify_suite(c: &mut Criterion) {
    let params = [ToyParams::new(0.5, 1.0, 0.5)];
    let opts = SuiteOptions::default();
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    g.bench_function("toy_single_point", |b| b.iter(|| run_toy_suite(&params, &GRID_T, &opts).unwrap()));
    g.finish();
}

criterion_group!(kernels, eigenvalues, expm);
criterion_group!(dynamics, toy_propagation, verify_suite);
criterion_main!(kernels, dynamics);
