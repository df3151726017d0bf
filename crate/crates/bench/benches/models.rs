use std::f64::consts::FRAC_PI_4;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stimsqueeze::estimation::{estimate_counts, Branch, CalibrationModel, Objective};
use stimsqueeze::fock::simulate_fock;
use stimsqueeze::metrology::{fisher_per_trial, optimal_phase, DEFAULT_STEP};
use stimsqueeze::simkit::sample_clicks_in_stream;
use stimsqueeze::{click_model, InterferometerConfig};

fn gaussian(c: &mut Criterion) {
    let cfg = InterferometerConfig::measured_fringes().unwrap();
    c.bench_function("click_model", |b| b.iter(|| click_model(black_box(&cfg), black_box(0.4)).unwrap()));
    c.bench_function("fisher_per_trial", |b| {
        b.iter(|| fisher_per_trial(|p| click_model(&cfg, p), black_box(0.4), DEFAULT_STEP).unwrap())
    });
    let ideal = InterferometerConfig::ideal(0.59);
    c.bench_function("optimal_phase", |b| b.iter(|| optimal_phase(|p| click_model(&ideal, p), DEFAULT_STEP).unwrap()));
}

fn estimation(c: &mut Criterion) {
    let cfg = InterferometerConfig::measured_tracking().unwrap();
    let cal = CalibrationModel::from_config(&cfg).unwrap();
    let branch = Branch::new(0.0, FRAC_PI_4).unwrap();
    let counts = sample_clicks_in_stream(&cfg, 0.4, 15_200_000, 0, 0).unwrap();
    c.bench_function("sample_window", |b| b.iter(|| sample_clicks_in_stream(&cfg, 0.4, 15_200_000, 0, black_box(1)).unwrap()));
    c.bench_function("estimate_window", |b| {
        b.iter(|| estimate_counts(black_box(&counts), &cal, &branch, Objective::LeastSquares).unwrap())
    });
    c.bench_function("calibration_tabulation", |b| b.iter(|| CalibrationModel::from_config(black_box(&cfg)).unwrap()));
}

fn fock(c: &mut Criterion) {
    let cfg = InterferometerConfig { overlap: 0.95, ..InterferometerConfig::symmetric(0.1, 0.8) };
    let mut group = c.benchmark_group("fock");
    group.sample_size(10);
    group.bench_function("matched_n48", |b| b.iter(|| simulate_fock(&InterferometerConfig::ideal(0.59), 0.4, 48).unwrap()));
    group.bench_function("mismatched_n12", |b| b.iter(|| simulate_fock(&cfg, 0.4, 12).unwrap()));
    group.finish();
}

criterion_group!(benches, gaussian, estimation, fock);
criterion_main!(benches);
