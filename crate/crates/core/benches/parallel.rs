//! Rayon pool against a single-thread pool on the two data-parallel hot spots.
//! Build with `--no-default-features` to time the plain sequential path.

use std::hint::black_box;

use autoevolute::closure::{AssembleOptions, NewtonOptions, ScanSpec};
use autoevolute::geometry::evolute;
use autoevolute::verify::verify_congruence;
use autoevolute::{assemble_closed_curve, grid_scan, newton_solve, CurveParams, RationalAngle, VelocityForm};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("rayon", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("one_thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn scan(c: &mut Criterion) {
    let spec = ScanSpec::new(VelocityForm::Sqrt, -0.2, RationalAngle::new(1, 3).unwrap());
    let mut group = c.benchmark_group("grid_scan_16x16");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| grid_scan(black_box(&spec)).unwrap()))
        });
    }
    group.finish();
}

fn congruence(c: &mut Criterion) {
    let target = RationalAngle::new(1, 3).unwrap();
    let start = CurveParams::base(0.69, 0.67, -0.2, VelocityForm::Sqrt).unwrap();
    let solved = newton_solve(&start, target, &NewtonOptions::default()).unwrap();
    let closed = assemble_closed_curve(&solved.params, target, &AssembleOptions::default()).unwrap();
    let ev = evolute(&closed.curve);
    let mut group = c.benchmark_group("congruence_1024");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| verify_congruence(black_box(&closed.curve), &ev, 1024, 1e-5).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, scan, congruence);
criterion_main!(benches);
