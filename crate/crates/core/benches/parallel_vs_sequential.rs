use std::hint::black_box;

use aniso_core::par;
use aniso_core::sampler::{
    factorize_covariance, sample, GridSpec, PsdCertificate, DEFAULT_CLIP_TOL,
};
use aniso_core::spectral::{
    logspace, theta_bound, verify_main_inequality, verify_psd_gram, DEFAULT_JITTER_TOL,
};
use aniso_core::stats::{test_not_fbs, NotFbsConfig};
use aniso_core::{FieldCovariance, HurstPair, StationaryKernel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn setup() -> (StationaryKernel, PsdCertificate) {
    let h = HurstPair::new(0.3, 0.7).unwrap();
    let cert = theta_bound(&h);
    let k = StationaryKernel::new(h, 0.9 * cert.theta_bound).unwrap();
    (k, PsdCertificate::Theta(cert))
}

fn main_inequality(c: &mut Criterion) {
    let (k, _) = setup();
    let grid = logspace(1e-3, 1e3, 400);
    let mut g = c.benchmark_group("main_inequality");
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_main_inequality(&k.hurst, k.theta, black_box(&grid)).unwrap())
        });
    }
    g.finish();
}

fn gram(c: &mut Criterion) {
    let (k, _) = setup();
    let axis = logspace(0.05, 4.0, 20);
    let pts: Vec<[f64; 2]> = axis
        .iter()
        .flat_map(|x| axis.iter().map(move |y| [x.ln(), y.ln()]))
        .collect();
    let mut g = c.benchmark_group("psd_gram");
    g.sample_size(10);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_psd_gram(&k, black_box(&pts), DEFAULT_JITTER_TOL).unwrap())
        });
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let (k, cert) = setup();
    let grid = GridSpec::new(logspace(0.1, 4.0, 16), logspace(0.1, 4.0, 16), true).unwrap();
    let factor =
        factorize_covariance(&FieldCovariance::new(k), &grid, &cert, DEFAULT_CLIP_TOL).unwrap();
    let mut g = c.benchmark_group("simulate_2000_paths");
    g.sample_size(10);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample(&factor, black_box(1), 2000).unwrap())
        });
    }
    g.finish();
}

fn witness(c: &mut Criterion) {
    let h = HurstPair::new(0.5, 0.5).unwrap();
    let k = StationaryKernel::r0(h);
    let cert = PsdCertificate::Theta(theta_bound(&h));
    let cfg = NotFbsConfig {
        n_paths: 2_000_000,
        significance: 0.01,
    };
    let mut g = c.benchmark_group("witness_2e6_paths");
    g.sample_size(10);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| test_not_fbs(&k, &cert, &cfg, black_box(9)).unwrap())
        });
    }
    g.finish();
    par::set_sequential(false);
}

criterion_group!(benches, main_inequality, gram, simulate, witness);
criterion_main!(benches);
