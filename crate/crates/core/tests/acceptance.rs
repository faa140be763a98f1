//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (bypassing output capture) and then asserts the same verdict.
//! Tests hold a shared lock so each runtime limit is measured alone.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use aniso_core::kernels::{f_h, fbs_covariance, r0, r_theta};
use aniso_core::lamperti::{check_r1, RectIncrement};
use aniso_core::rng::NormalStream;
use aniso_core::sampler::{
    factorize_covariance, rectangular_increments, sample, GridSpec, PsdCertificate,
};
use aniso_core::spectral::{
    a_closed_form, a_quadrature, a_series, b_quadrature, b_series, coordinate_bound,
    gamma_modulus_ratio, ln_gamma_modulus_ratio, ln_sinhc_pi, logspace, theta_bound,
    verify_main_inequality, verify_psd_gram,
};
use aniso_core::stats::{
    empirical_covariance, test_increment_stationarity, test_not_fbs, witness_gap,
    IncrementTestConfig, NotFbsConfig, RectPair, DEFAULT_SIGNIFICANCE,
};
use aniso_core::{par, FieldCovariance, HurstPair, StationaryKernel};
use statrs::distribution::{ChiSquared, ContinuousCDF};

static SERIAL: Mutex<()> = Mutex::new(());

fn verdict(label: &str, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "[{}] {label} ({:.2} s): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{label}: {detail}");
}

fn hp(a: f64, b: f64) -> HurstPair {
    HurstPair::new(a, b).unwrap()
}

/// Uniforms on `(lo, hi)` from a fixed stream.
struct Draws(NormalStream);

impl Draws {
    fn new(stream: u64) -> Self {
        Self(NormalStream::new(20_240_601, stream))
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.next_uniform()
    }
}

fn sci(xs: &[f64]) -> String {
    let cells: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", cells.join(", "))
}

fn rel(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

#[test]
fn identity_suite() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut d = Draws::new(1);
    let mut worst = [0.0f64; 4];
    for _ in 0..10_000 {
        let h = hp(d.uniform(0.01, 0.99), d.uniform(0.01, 0.99));
        let k = StationaryKernel::new(h, d.uniform(-2.0, 2.0)).unwrap();
        let v = [d.uniform(-20.0, 20.0), d.uniform(-20.0, 20.0)];
        let r = r_theta(&k, v);
        let neg = r_theta(&k, [-v[0], -v[1]]);
        let f2 = r_theta(&k, [v[0], -v[1]]);
        let f1 = r_theta(&k, [-v[0], v[1]]);
        let base = 2.0 * r0(&h, v);
        let sums = [
            rel(check_r1(&k, v), r.abs() + f2.abs() + base),
            rel((r - neg).abs(), r.abs() + neg.abs()),
            rel((r + f2 - base).abs(), r.abs() + f2.abs() + base),
            rel((r + f1 - base).abs(), r.abs() + f1.abs() + base),
        ];
        for (w, s) in worst.iter_mut().zip(sums) {
            *w = if s.is_nan() { f64::NAN } else { w.max(s) };
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|w| *w <= 1e-12) && elapsed < Duration::from_secs(5);
    verdict(
        "identity suite",
        pass,
        elapsed,
        &format!(
            "max relative residual folded/even/two-sided = {} (tol 1e-12, limit 5 s)",
            sci(&worst)
        ),
    );
}

#[test]
fn half_hurst_collapse() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let vs: Vec<f64> = (0..200).map(|i| -30.0 + 60.0 * i as f64 / 199.0).collect();
    let xs: Vec<f64> = (0..200).map(|i| 40.0 * i as f64 / 199.0).collect();
    let mut worst = [0.0f64; 4];
    for &v in &vs {
        worst[0] = worst[0].max((f_h(0.5, v).unwrap() - 2.0 * (-v.abs() / 2.0).exp()).abs());
    }
    for &x in &xs {
        let a = 1.0 / (0.25 + x * x);
        let b = 4.0 * x / ((0.25 + x * x) * (2.25 + x * x));
        worst[1] = worst[1].max((a_series(0.5, x, 1e-13).unwrap() - a).abs());
        worst[2] = worst[2].max((a_closed_form(0.5, x).unwrap() - a).abs());
        worst[3] = worst[3].max((b_series(0.5, x, 1e-13).unwrap() - b).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|w| *w <= 1e-10) && elapsed < Duration::from_secs(1);
    verdict(
        "H = 1/2 collapse",
        pass,
        elapsed,
        &format!(
            "max error F/a_series/a_closed/b_series = {} on 200-point grids (tol 1e-10, limit 1 s)",
            sci(&worst)
        ),
    );
}

#[test]
fn spectral_routes_agree() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut xs = vec![0.0];
    xs.extend(logspace(1e-3, 50.0, 99));
    let hs: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let cells: Vec<(f64, f64)> = hs
        .iter()
        .flat_map(|h| xs.iter().map(move |x| (*h, *x)))
        .collect();
    let diffs = par::map_slice(&cells, |&(h, x)| {
        let aq = a_quadrature(h, x, 1e-11).unwrap();
        [
            (a_series(h, x, 1e-11).unwrap() - aq).abs(),
            (a_closed_form(h, x).unwrap() - aq).abs(),
            (b_series(h, x, 1e-11).unwrap() - b_quadrature(h, x, 1e-11).unwrap()).abs(),
        ]
    });
    let mut worst = [0.0f64; 3];
    for d in diffs {
        for k in 0..3 {
            worst[k] = if d[k].is_nan() {
                f64::NAN
            } else {
                worst[k].max(d[k])
            };
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|w| *w < 1e-8) && elapsed < Duration::from_secs(60);
    verdict(
        "three-route spectral agreement",
        pass,
        elapsed,
        &format!(
            "{} cells; max |a_s-a_q|, |a_c-a_q|, |b_s-b_q| = {} (tol 1e-8, limit 60 s)",
            cells.len(),
            sci(&worst)
        ),
    );
}

#[test]
fn positivity_suite() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let hs: Vec<f64> = (1..=19).map(|i| i as f64 / 20.0).collect();
    let mut xs = vec![0.0];
    xs.extend(logspace(1e-3, 1e3, 200));
    let cells: Vec<(f64, f64)> = hs
        .iter()
        .flat_map(|h| xs.iter().map(move |x| (*h, *x)))
        .collect();
    let failures: usize = par::map_slice(&cells, |&(h, x)| {
        let a = a_series(h, x, 1e-12).unwrap();
        let b = b_series(h, x, 1e-12).unwrap();
        let half_root = 0.5 * coordinate_bound(h).unwrap() * 0.9f64.sqrt();
        let mut fails = usize::from(!(a > 0.0));
        fails += usize::from(!(a - half_root * b.abs() > 0.0));
        if x > 0.0 {
            let lead = 8.0 * x * h * h / ((h * h + x * x) * (9.0 * h * h + x * x));
            fails += usize::from(!(b > lead));
            fails += usize::from(!(ln_gamma_modulus_ratio(h, x).unwrap() >= ln_sinhc_pi(x)));
            if x <= 10.0 {
                let ratio = gamma_modulus_ratio(h, x).unwrap();
                let sinhc = (std::f64::consts::PI * x).sinh() / (std::f64::consts::PI * x);
                fails += usize::from(!(ratio >= sinhc));
            }
        }
        fails
    })
    .into_iter()
    .sum();
    let elapsed = start.elapsed();
    verdict(
        "positivity suite",
        failures == 0,
        elapsed,
        &format!("{failures} failures over {} (H, x) cells", cells.len()),
    );
}

#[test]
fn theta_bound_value() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let bound = theta_bound(&hp(0.5, 0.5)).theta_bound;
    let target = 0.005_328_4;
    // 50-digit evaluation of (1/pi)(1/4) tanh(pi/2), squared
    let oracle = 0.005_326_761_163_845_968;
    let elapsed = start.elapsed();
    verdict(
        "theta bound value",
        (bound - target).abs() <= 1e-6,
        elapsed,
        &format!(
            "max|theta| = {bound:.16} vs 0.0053284 +- 1e-6 (off by {:.2e}); high-precision value {oracle} (off by {:.1e})",
            (bound - target).abs(),
            (bound - oracle).abs()
        ),
    );
}

#[test]
fn psd_certification() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut d = Draws::new(6);
    let mut worst = f64::INFINITY;
    let mut all = true;
    for set in 0..20 {
        let h = if set % 2 == 0 {
            hp(0.5, 0.5)
        } else {
            hp(0.3, 0.7)
        };
        let k = StationaryKernel::new(h, 0.9 * theta_bound(&h).theta_bound).unwrap();
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|_| [d.uniform(-4.0, 4.0), d.uniform(-4.0, 4.0)])
            .collect();
        let r = verify_psd_gram(&k, &pts, 1e-8).unwrap();
        all &= r.pass;
        worst = worst.min(r.checks[0].statistic);
    }
    let control = verify_main_inequality(&hp(0.5, 0.5), 100.0, &logspace(1e-3, 1e3, 200)).unwrap();
    let elapsed = start.elapsed();
    let pass = all && !control.pass && elapsed < Duration::from_secs(30);
    verdict(
        "PSD certification",
        pass,
        elapsed,
        &format!(
            "20 Gram sets of 200 points, min lambda_min/lambda_max = {worst:.3e} (>= -1e-8); theta=100 main inequality pass = {} (limit 30 s)",
            control.pass
        ),
    );
}

#[test]
fn simulation_conformance() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let h = hp(0.3, 0.7);
    let k = StationaryKernel::r0(h);
    let cert = PsdCertificate::Theta(theta_bound(&h));
    let axis: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let grid = GridSpec::new(axis.clone(), axis.clone(), false).unwrap();
    let factor = factorize_covariance(&FieldCovariance::new(k), &grid, &cert, 1e-12).unwrap();
    let n = 10_000;
    let samples = sample(&factor, 77, n).unwrap();

    let idx: Vec<[usize; 2]> = (0..10).flat_map(|i| (0..10).map(move |j| [i, j])).collect();
    let pairs: Vec<_> = idx
        .iter()
        .enumerate()
        .flat_map(|(a, i)| idx[a..].iter().map(move |j| (*i, *j)))
        .collect();
    let est = empirical_covariance(&samples, &pairs).unwrap();
    let within = est
        .iter()
        .filter(|e| {
            let t = [axis[e.i[0]], axis[e.i[1]]];
            let s = [axis[e.j[0]], axis[e.j[1]]];
            (e.value - fbs_covariance(&h, t, s).unwrap()).abs() <= 4.0 * e.standard_error
        })
        .count();
    let frac = within as f64 / est.len() as f64;

    let rects = [
        RectIncrement::new([0.5, 0.5], [1.0, 1.0]).unwrap(),
        RectIncrement::new([1.5, 2.0], [3.5, 2.5]).unwrap(),
        RectIncrement::new([4.0, 1.0], [5.0, 4.0]).unwrap(),
    ];
    let chi = ChiSquared::new(n as f64).unwrap();
    let alpha = DEFAULT_SIGNIFICANCE / rects.len() as f64;
    let p_values: Vec<f64> = rects
        .iter()
        .map(|r| {
            let [d1, d2] = r.sides();
            let truth = d1.powf(2.0 * h.h1()) * d2.powf(2.0 * h.h2());
            let ss: f64 = samples
                .iter()
                .map(|s| rectangular_increments(s, r).unwrap().powi(2))
                .sum();
            let stat = ss / truth;
            (2.0 * chi.cdf(stat).min(chi.sf(stat))).min(1.0)
        })
        .collect();
    let elapsed = start.elapsed();
    let pass =
        frac >= 0.99 && p_values.iter().all(|p| *p >= alpha) && elapsed < Duration::from_secs(120);
    verdict(
        "simulation conformance",
        pass,
        elapsed,
        &format!(
            "{within}/{} covariance entries within 4 SE ({:.2}%); increment chi2 p-values {p_values:.3?} vs {alpha:.4} (limit 120 s)",
            est.len(),
            100.0 * frac
        ),
    );
}

#[test]
fn counterexample_demonstration() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let h = hp(0.5, 0.5);
    let closed = theta_bound(&h);
    let k = StationaryKernel::new(h, 0.9 * closed.theta_bound).unwrap();
    let cert = PsdCertificate::Theta(closed);

    let rect = |l: [f64; 2], u: [f64; 2]| RectIncrement::new(l, u).unwrap();
    let cfg = IncrementTestConfig {
        n_paths: 10_000,
        pairs: vec![
            RectPair::translate(rect([1.0, 1.0], [2.0, 2.0]), [1.5, 0.5]).unwrap(),
            RectPair::translate(rect([0.5, 1.0], [1.0, 3.0]), [2.0, 2.0]).unwrap(),
            RectPair::translate(rect([1.0, 0.2], [3.0, 0.7]), [0.0, 3.0]).unwrap(),
        ],
        significance: DEFAULT_SIGNIFICANCE,
        correction: Default::default(),
    };
    let stationarity = test_increment_stationarity(&k, &cert, &cfg, 2024).unwrap();
    let stationary = stationarity.iter().all(|o| o.pass);

    let w = witness_gap(&k).unwrap();
    let n = (1.1 * w.required_paths() as f64).ceil() as u64;
    let gap_se = w.gap.abs() / w.standard_error(n);
    let witness = test_not_fbs(
        &k,
        &cert,
        &NotFbsConfig {
            n_paths: n,
            significance: DEFAULT_SIGNIFICANCE,
        },
        2024,
    )
    .unwrap();

    let null = StationaryKernel::r0(h);
    let null_cfg = NotFbsConfig {
        n_paths: 10_000,
        significance: DEFAULT_SIGNIFICANCE,
    };
    let rejections = (0..50u64)
        .filter(|s| {
            test_not_fbs(&null, &cert, &null_cfg, 5000 + s)
                .unwrap()
                .pass
        })
        .count();
    let elapsed = start.elapsed();
    let pass = stationary
        && witness.pass
        && gap_se >= 5.0
        && rejections as f64 / 50.0 <= 0.03
        && elapsed < Duration::from_secs(300);
    verdict(
        "counterexample demonstration",
        pass,
        elapsed,
        &format!(
            "stationarity {}/{} pass; witness at (e,1),(1,e): gap {:.4e} = {gap_se:.2} SE with {n} paths, z = {:.3}, p = {:.2e}; \
             theta=0 rejections {rejections}/50 (limit 300 s)",
            stationarity.iter().filter(|o| o.pass).count(),
            stationarity.len(),
            w.gap,
            witness.statistic,
            witness.p_value
        ),
    );
}
