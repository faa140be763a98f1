//! Subcommands. Each builds a report, writes its artifacts under `out` and
//! returns the report; the caller maps `report.pass` to the exit code.

use std::path::PathBuf;

use serde_json::json;

use aniso_core::kernels::{f_h, r0, r_theta};
use aniso_core::lamperti::{check_lemma1, check_lemma2, check_lemma3, check_r1, field_cov};
use aniso_core::rng::NormalStream;
use aniso_core::sampler::{factorize_covariance, sample, GridSpec, PsdCertificate};
use aniso_core::spectral::{
    a_closed_form, a_quadrature, a_series_value, b_quadrature, b_series_value,
    fourier_inversion_scan, logspace, theta_bound, verify_main_inequality, verify_psd_gram,
    SCAN_SERIES_TOL,
};
use aniso_core::stats::{
    test_increment_stationarity, test_not_fbs, witness_gap, IncrementTestConfig, NotFbsConfig,
    WITNESS,
};
use aniso_core::{
    CheckRecord, FieldCovariance, StationaryCovariance, StationaryKernel, VerificationReport,
};

use crate::config::{PathCount, RunConfig, SampleFormat};
use crate::output::{write_atomic, write_json, Csv};
use crate::CliError;

/// Streams of the run seed used for random test inputs.
const VERIFY_STREAM: u64 = 1 << 40;

pub struct Run {
    pub report: VerificationReport,
    pub files: Vec<PathBuf>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn new_report(name: &str, cfg: &RunConfig) -> VerificationReport {
    VerificationReport::new(name, cfg.echo())
}

/// Prefix the names of `sub`'s checks and append them to `report`.
fn absorb_as(report: &mut VerificationReport, sub: VerificationReport, prefix: &str) {
    for mut c in sub.checks {
        c.name = format!("{prefix}.{}", c.name);
        report.push(c);
    }
}

pub fn kernel_eval(cfg: &RunConfig) -> Result<Run, CliError> {
    let k = cfg.kernel()?;
    let [h1, h2] = k.hurst.as_array();
    let ke = &cfg.kernel_eval;
    let vs = linspace(ke.v_min, ke.v_max, ke.n);
    let mut csv = Csv::new(&["v1", "v2", "F_H1", "F_H2", "R0", "R_theta"]);
    let mut nonfinite = 0usize;
    for &v1 in &vs {
        for &v2 in &vs {
            let row = [
                v1,
                v2,
                f_h(h1, v1)?,
                f_h(h2, v2)?,
                r0(&k.hurst, [v1, v2]),
                r_theta(&k, [v1, v2]),
            ];
            nonfinite += row.iter().filter(|x| !x.is_finite()).count();
            csv.row(&row);
        }
    }
    let mut report = new_report("kernel_eval", cfg);
    report.push(CheckRecord::at_most(
        "kernel_eval.nonfinite_values",
        json!({ "rows": vs.len() * vs.len() }),
        nonfinite as f64,
        0.0,
    ));
    let origin = (r0(&k.hurst, [0.0, 0.0]) - 1.0)
        .abs()
        .max((r_theta(&k, [0.0, 0.0]) - 1.0).abs());
    report.push(CheckRecord::at_most(
        "kernel_eval.unit_at_origin",
        json!({ "kernel": k.describe() }),
        origin,
        cfg.tol,
    ));
    let path = cfg.out.join("kernel_eval.csv");
    write_atomic(&path, csv.as_str().as_bytes())?;
    Ok(Run {
        report,
        files: vec![path],
    })
}

/// Worst relative residual over random inputs.
struct Worst {
    value: f64,
    at: serde_json::Value,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            at: serde_json::Value::Null,
        }
    }

    fn update(&mut self, residual: f64, scale: f64, at: impl FnOnce() -> serde_json::Value) {
        let r = if scale > 0.0 {
            residual / scale
        } else {
            residual
        };
        if !self.value.is_nan() && (r.is_nan() || r > self.value) {
            self.value = r;
            self.at = at();
        }
    }

    fn check(self, name: &str, n: usize, tol: f64) -> CheckRecord {
        CheckRecord::at_most(
            name,
            json!({ "samples": n, "worst_at": self.at }),
            self.value,
            tol,
        )
    }
}

fn identity_checks(
    cfg: &RunConfig,
    k: &StationaryKernel,
    report: &mut VerificationReport,
) -> Result<(), CliError> {
    let n = cfg.verify.identity_samples;
    let range = cfg.verify.lag_range;
    let mut rng = NormalStream::new(cfg.seed, VERIFY_STREAM);
    let mut lag = || {
        [
            range * (2.0 * rng.next_uniform() - 1.0),
            range * (2.0 * rng.next_uniform() - 1.0),
        ]
    };
    let lags: Vec<[f64; 2]> = (0..n).map(|_| lag()).collect();
    let mut rng = NormalStream::new(cfg.seed, VERIFY_STREAM + 1);
    let mut point = || {
        [
            0.2 + 4.8 * rng.next_uniform(),
            0.2 + 4.8 * rng.next_uniform(),
        ]
    };
    let pairs: Vec<([f64; 2], [f64; 2])> = (0..n).map(|_| (point(), point())).collect();

    let (mut r1, mut sym, mut two1, mut two2) =
        (Worst::new(), Worst::new(), Worst::new(), Worst::new());
    for &v in &lags {
        let at = || json!(v);
        let (r, rm, r_flip1, r_flip2) = (
            k.eval(v),
            k.eval([-v[0], -v[1]]),
            k.eval([v[0], -v[1]]),
            k.eval([-v[0], v[1]]),
        );
        let base = 2.0 * r0(&k.hurst, v);
        r1.update(check_r1(k, v), r.abs() + r_flip1.abs() + base, at);
        sym.update((r - rm).abs(), r.abs() + rm.abs(), at);
        two1.update(
            (r + r_flip1 - base).abs(),
            r.abs() + r_flip1.abs() + base,
            at,
        );
        two2.update(
            (r + r_flip2 - base).abs(),
            r.abs() + r_flip2.abs() + base,
            at,
        );
    }
    report.push(r1.check("identity.folded_sum", n, cfg.tol));
    report.push(sym.check("identity.even", n, cfg.tol));
    report.push(two1.check("identity.two_sided_v2", n, cfg.tol));
    report.push(two2.check("identity.two_sided_v1", n, cfg.tol));

    let fc = FieldCovariance::new(*k);
    let (mut l1, mut l2, mut l3) = (Worst::new(), Worst::new(), Worst::new());
    let var = |t: [f64; 2]| t[0].powf(2.0 * k.hurst.h1()) * t[1].powf(2.0 * k.hurst.h2());
    for &(t, s) in &pairs {
        let at = || json!({ "t": t, "s": s });
        let mid = [s[0], t[1]];
        let (a, b) = check_lemma1(&fc, t, s)?;
        l1.update(a.max(b), var(t) + var(mid) + var(s), at);
        let (a, b) = check_lemma2(&fc, t, s)?;
        l2.update(a.max(b), var(t) + var(mid) + var(s), at);
        l3.update(
            check_lemma3(&fc, t, s)?,
            var(t) + var(s) + var([t[0], s[1]]) + var(mid),
            at,
        );
    }
    report.push(l1.check("identity.increment_variances", n, cfg.tol));
    report.push(l2.check("identity.mixed_covariances", n, cfg.tol));
    report.push(l3.check("identity.covariance_sum", n, cfg.tol));
    Ok(())
}

fn admissibility(k: &StationaryKernel) -> CheckRecord {
    let c = theta_bound(&k.hurst);
    CheckRecord::at_most(
        "theta.admissible",
        json!({ "theta": k.theta, "certificate": c }),
        k.theta.abs(),
        c.theta_bound,
    )
}

pub fn verify(cfg: &RunConfig) -> Result<Run, CliError> {
    let k = cfg.kernel()?;
    let v = &cfg.verify;
    let mut report = new_report("verify", cfg);
    identity_checks(cfg, &k, &mut report)?;
    report.push(admissibility(&k));

    let mut xs = vec![0.0];
    xs.extend(logspace(v.x_min, v.x_max, v.n_x));
    report.absorb(verify_main_inequality(&k.hurst, k.theta, &xs)?);

    let mut fx = vec![0.0];
    fx.extend(logspace(0.05, 50.0, v.fourier_n.saturating_sub(1)));
    report.absorb(fourier_inversion_scan(&k, &fx, &fx, SCAN_SERIES_TOL)?);

    let mut rng = NormalStream::new(cfg.seed, VERIFY_STREAM + 2);
    let half = 0.5 * v.lag_range;
    for set in 0..v.gram_sets {
        let pts: Vec<[f64; 2]> = (0..v.gram_points)
            .map(|_| {
                [
                    half * (2.0 * rng.next_uniform() - 1.0),
                    half * (2.0 * rng.next_uniform() - 1.0),
                ]
            })
            .collect();
        absorb_as(
            &mut report,
            verify_psd_gram(&k, &pts, v.jitter_tol)?,
            &format!("set{set}"),
        );
    }
    Ok(Run {
        report,
        files: Vec::new(),
    })
}

pub fn theta_bound_cmd(cfg: &RunConfig) -> Result<Run, CliError> {
    let h = cfg.hurst_pair()?;
    let cert = theta_bound(&h);
    let v = &cfg.verify;
    let mut report = new_report("theta_bound", cfg);
    report.push(CheckRecord::above(
        "theta_bound.positive",
        json!({ "certificate": cert }),
        cert.theta_bound,
        0.0,
    ));
    // the certificate itself must pass the main inequality at the bound
    let mut xs = vec![0.0];
    xs.extend(logspace(v.x_min, v.x_max, v.n_x));
    absorb_as(
        &mut report,
        verify_main_inequality(&h, cert.theta_bound, &xs)?,
        "at_bound",
    );
    report.push(admissibility(&cfg.kernel()?));
    let path = cfg.out.join("theta_certificate.json");
    write_json(&path, &cert)?;
    Ok(Run {
        report,
        files: vec![path],
    })
}

pub fn spectral(cfg: &RunConfig) -> Result<Run, CliError> {
    let h = cfg.hurst_pair()?;
    let s = &cfg.spectral;
    let xs = linspace(s.x_min, s.x_max, s.n);
    let mut hs = vec![h.h1()];
    if h.h2() != h.h1() {
        hs.push(h.h2());
    }
    let mut csv = Csv::new(&[
        "h",
        "x",
        "a_series",
        "a_quadrature",
        "a_closed_form",
        "b_series",
        "b_quadrature",
        "a_series_tail",
        "b_series_tail",
    ]);
    let mut report = new_report("spectral", cfg);
    for (i, &hh) in hs.iter().enumerate() {
        let rows = aniso_core::par::map_slice(&xs, |&x| -> aniso_core::Result<[f64; 9]> {
            let a = a_series_value(hh, x, s.route_tol)?;
            let b = b_series_value(hh, x, s.route_tol)?;
            Ok([
                hh,
                x,
                a.value,
                a_quadrature(hh, x, s.route_tol)?,
                a_closed_form(hh, x)?,
                b.value,
                b_quadrature(hh, x, s.route_tol)?,
                a.tail_bound,
                b.tail_bound,
            ])
        });
        let mut worst = [0.0f64; 3];
        let (mut min_a, mut min_b_margin) = (f64::INFINITY, f64::INFINITY);
        for r in rows {
            let r = r?;
            csv.row(&r);
            let x = r[1];
            worst[0] = worst[0].max((r[2] - r[3]).abs());
            worst[1] = worst[1].max((r[4] - r[3]).abs());
            worst[2] = worst[2].max((r[5] - r[6]).abs());
            min_a = min_a.min(r[2]);
            if x > 0.0 {
                let lower = 8.0 * x * hh * hh / ((hh * hh + x * x) * (9.0 * hh * hh + x * x));
                min_b_margin = min_b_margin.min(r[5] - lower);
            }
        }
        let inputs = json!({ "h": hh, "points": xs.len(), "route_tol": s.route_tol });
        let tag = format!("spectral.h{}", i + 1);
        for (name, w) in [
            "a_series_vs_quadrature",
            "a_closed_form_vs_quadrature",
            "b_series_vs_quadrature",
        ]
        .into_iter()
        .zip(worst)
        {
            report.push(CheckRecord::at_most(
                format!("{tag}.{name}"),
                inputs.clone(),
                w,
                s.agreement_tol,
            ));
        }
        report.push(CheckRecord::above(
            format!("{tag}.a_positive"),
            inputs.clone(),
            min_a,
            0.0,
        ));
        if min_b_margin.is_finite() {
            report.push(CheckRecord::above(
                format!("{tag}.b_above_leading_term"),
                inputs,
                min_b_margin,
                0.0,
            ));
        }
    }
    let path = cfg.out.join("spectral.csv");
    write_atomic(&path, csv.as_str().as_bytes())?;
    Ok(Run {
        report,
        files: vec![path],
    })
}

/// Closed-form certificate when it covers `theta`, otherwise a Gram scan on
/// the log-points the run will use.
fn certify(
    k: &StationaryKernel,
    log_points: &[[f64; 2]],
    jitter_tol: f64,
    report: &mut VerificationReport,
) -> Result<Option<PsdCertificate>, CliError> {
    let closed = theta_bound(&k.hurst);
    if closed.admits(k) {
        report.push(admissibility(k));
        return Ok(Some(PsdCertificate::Theta(closed)));
    }
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(log_points.len());
    for p in log_points {
        if !pts.contains(p) {
            pts.push(*p);
        }
    }
    if pts.len() < 2 {
        report.push(admissibility(k));
        return Ok(None);
    }
    let scan = verify_psd_gram(k, &pts, jitter_tol)?;
    let pass = scan.pass;
    let cert = PsdCertificate::gram(k, scan.clone());
    absorb_as(report, scan, "certificate");
    Ok(pass.then_some(cert))
}

pub fn simulate(cfg: &RunConfig) -> Result<Run, CliError> {
    let k = cfg.kernel()?;
    let sc = &cfg.simulate;
    let grid = GridSpec::new(sc.t1.clone(), sc.t2.clone(), sc.include_axes)?;
    let mut report = new_report("simulate", cfg);
    let Some(cert) = certify(&k, &grid.log_points(), cfg.verify.jitter_tol, &mut report)? else {
        return Ok(Run {
            report,
            files: Vec::new(),
        });
    };
    let fc = FieldCovariance::new(k);
    let factor = factorize_covariance(&fc, &grid, &cert, sc.clip_tol)?;

    let pts = factor.points().to_vec();
    let cov = factor.covariance();
    let mut recon = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        for (j, q) in pts.iter().enumerate() {
            recon = recon.max((cov[(i, j)] - field_cov(&fc, *p, *q)?).abs());
        }
    }
    report.push(CheckRecord::at_most(
        "factor.reconstruction",
        json!({
            "rank": factor.rank(),
            "clipped": factor.clipped(),
            "lambda_min": factor.lambda_min(),
            "lambda_max": factor.lambda_max(),
            "clip_tol": sc.clip_tol,
        }),
        recon,
        sc.clip_tol * factor.lambda_max(),
    ));

    let samples = sample(&factor, cfg.seed, sc.paths)?;
    let mut files = Vec::new();
    let dir = cfg.out.join("samples");
    for s in samples.iter().take(sc.write_paths) {
        if matches!(sc.format, SampleFormat::Csv | SampleFormat::Both) {
            let p = dir.join(format!("path_{:05}.csv", s.path));
            write_atomic(&p, s.to_csv().as_bytes())?;
            files.push(p);
        }
        if matches!(sc.format, SampleFormat::Json | SampleFormat::Both) {
            let p = dir.join(format!("path_{:05}.json", s.path));
            write_json(&p, s)?;
            files.push(p);
        }
    }

    if sc.paths >= 2 {
        let n = sc.paths as f64;
        let (t1, t2) = (grid.t1_coords(), grid.t2_coords());
        let mut table = Csv::new(&["t1", "t2", "empirical_variance", "analytic_variance", "z"]);
        let (mut inside, mut total, mut worst) = (0usize, 0usize, 0.0f64);
        for (i, &a) in t1.iter().enumerate() {
            for (j, &b) in t2.iter().enumerate() {
                if a == 0.0 || b == 0.0 {
                    continue;
                }
                let emp = samples.iter().map(|s| s.values[i][j].powi(2)).sum::<f64>() / n;
                let truth = field_cov(&fc, [a, b], [a, b])?;
                let z = (emp - truth) / (truth * (2.0 / n).sqrt());
                table.row(&[a, b, emp, truth, z]);
                total += 1;
                inside += usize::from(z.abs() <= 4.0);
                worst = worst.max(z.abs());
            }
        }
        let p = cfg.out.join("variance_table.csv");
        write_atomic(&p, table.as_str().as_bytes())?;
        files.push(p);
        report.push(CheckRecord::at_least(
            "variance.fraction_within_4sd",
            json!({ "points": total, "paths": sc.paths, "max_abs_z": worst }),
            inside as f64 / total.max(1) as f64,
            0.99,
        ));
    }
    Ok(Run { report, files })
}

pub fn test(cfg: &RunConfig) -> Result<Run, CliError> {
    let k = cfg.kernel()?;
    let tc = &cfg.test;
    let pairs = cfg.rect_pairs()?;
    let mut report = new_report("test", cfg);

    let logs: Vec<[f64; 2]> = pairs
        .iter()
        .flat_map(|p| [p.base, p.shifted])
        .flat_map(|r| r.signed_corners().map(|(c, _)| c))
        .chain(WITNESS)
        .filter(|c| c[0] > 0.0 && c[1] > 0.0)
        .map(|c| [c[0].ln(), c[1].ln()])
        .collect();
    let Some(cert) = certify(&k, &logs, cfg.verify.jitter_tol, &mut report)? else {
        return Ok(Run {
            report,
            files: Vec::new(),
        });
    };

    let inc = IncrementTestConfig {
        n_paths: tc.paths,
        pairs,
        significance: tc.significance,
        correction: Default::default(),
    };
    for o in test_increment_stationarity(&k, &cert, &inc, cfg.seed)? {
        report.push(o.to_check());
    }

    let w = witness_gap(&k)?;
    let n_witness = match tc.witness_paths {
        PathCount::Fixed(n) => n,
        PathCount::Auto if k.is_r0() => tc.paths as u64,
        PathCount::Auto => (1.1 * w.required_paths() as f64)
            .ceil()
            .max(tc.paths as f64) as u64,
    };
    let nf = NotFbsConfig {
        n_paths: n_witness,
        significance: tc.significance,
    };
    let outcome = test_not_fbs(&k, &cert, &nf, cfg.seed)?;
    if k.is_r0() {
        // the field is the sheet itself: the fBs value must not be rejected
        report.push(CheckRecord::at_least(
            "not_fbs.null_consistency",
            json!({ "statistic": outcome.statistic, "description": outcome.description }),
            outcome.p_value,
            tc.significance,
        ));
    } else {
        report.push(CheckRecord::at_least(
            "not_fbs.gap_in_standard_errors",
            json!({ "gap": w.gap, "fbs": w.fbs, "field": w.field, "paths": n_witness }),
            w.gap.abs() / w.standard_error(n_witness),
            5.0,
        ));
        report.push(outcome.to_check());
    }
    Ok(Run {
        report,
        files: Vec::new(),
    })
}
