//! Positive-definiteness certificates for `R_theta`.
//!
//! Three levels, from cheapest to most direct:
//!
//! * [`theta_bound`]: the closed-form admissible `|theta|`.
//! * [`verify_main_inequality`] and [`fourier_inversion_scan`]: sign of the
//!   spectral density `a1(x) a2(y) - theta/4 b1(x) b2(y)` on frequency grids.
//! * [`verify_psd_gram`]: smallest eigenvalue of a Gram matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::kernels::{check_hurst, HurstPair, StationaryCovariance, StationaryKernel};
use crate::par;
use crate::report::{CheckRecord, VerificationReport};
use crate::spectral::series::{a_series_value, b_series_value};
use crate::spectral::transforms::total_mass_bound;

/// Default relative eigenvalue floor for Gram checks.
pub const DEFAULT_JITTER_TOL: f64 = 1e-8;

/// Largest Gram matrix accepted by [`verify_psd_gram`].
pub const MAX_GRAM_POINTS: usize = 2048;

/// Series truncation used by the grid scans.
pub const SCAN_SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    ClosedFormBound,
    GramScan,
    FourierScan,
}

/// Largest `|theta|` for which `R_theta` is known to be positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCertificate {
    pub hurst: HurstPair,
    pub theta_bound: f64,
    pub method: CertificateMethod,
    pub evidence: Value,
    pub tolerance: f64,
}

impl ThetaCertificate {
    /// Whether the certificate covers `kernel`.
    pub fn admits(&self, kernel: &StationaryKernel) -> bool {
        kernel.hurst == self.hurst && kernel.theta.abs() <= self.theta_bound
    }

    /// Certificate for exactly `|kernel.theta|` backed by a passing scan.
    pub fn from_scan(
        kernel: &StationaryKernel,
        report: &VerificationReport,
        method: CertificateMethod,
        tolerance: f64,
    ) -> Result<Self> {
        if method == CertificateMethod::ClosedFormBound {
            return Err(domain("closed-form certificates come from theta_bound"));
        }
        if !report.pass {
            return Err(Error::NotCertified(format!(
                "scan '{}' failed for {}",
                report.name,
                kernel.describe()
            )));
        }
        if kernel.theta == 0.0 {
            return Err(domain("scan certificates need theta != 0"));
        }
        Ok(Self {
            hurst: kernel.hurst,
            theta_bound: kernel.theta.abs(),
            method,
            evidence: json!({
                "report": report.name,
                "checks": report.checks.len(),
                "statistics": report.checks.iter().map(|c| c.statistic).collect::<Vec<_>>(),
            }),
            tolerance,
        })
    }
}

/// Per-coordinate bound on `sqrt|theta|`:
/// `Gamma(2H)/Gamma(H)^2 (1-H)/(4H) sin(pi H) tanh(pi H)`.
pub fn coordinate_bound(h: f64) -> Result<f64> {
    check_hurst(h)?;
    let g = (ln_gamma(2.0 * h) - 2.0 * ln_gamma(h)).exp();
    Ok(g * (1.0 - h) / (4.0 * h) * (PI * h).sin() * (PI * h).tanh())
}

/// Closed-form certificate: `max |theta| = min_i coordinate_bound(H_i)^2`.
pub fn theta_bound(hurst: &HurstPair) -> ThetaCertificate {
    let b = hurst
        .as_array()
        .map(|h| coordinate_bound(h).expect("HurstPair is validated"));
    let binding = if b[0] <= b[1] { 0 } else { 1 };
    let s = b[binding];
    ThetaCertificate {
        hurst: *hurst,
        theta_bound: s * s,
        method: CertificateMethod::ClosedFormBound,
        evidence: json!({
            "sqrt_bound": b,
            "binding_coordinate": binding + 1,
        }),
        tolerance: 1e-14,
    }
}

/// Worst point of `a(x) - sqrt|theta|/2 |b(x)|` over a grid, with series
/// truncation bounds charged against the margin.
#[derive(Debug, Clone, Copy)]
struct Margin {
    x: f64,
    margin: f64,
    relative: f64,
}

fn worst_margin(h: f64, half_root: f64, x_grid: &[f64]) -> Result<Margin> {
    let rows = par::map_slice(x_grid, |&x| -> Result<Margin> {
        let a = a_series_value(h, x, SCAN_SERIES_TOL)?;
        let b = b_series_value(h, x, SCAN_SERIES_TOL)?;
        let margin = (a.value - a.tail_bound) - half_root * (b.value.abs() + b.tail_bound);
        Ok(Margin {
            x,
            margin,
            relative: margin / a.value,
        })
    });
    let mut worst: Option<Margin> = None;
    for r in rows {
        let r = r?;
        if worst.is_none_or(|w| r.margin < w.margin) {
            worst = Some(r);
        }
    }
    worst.ok_or_else(|| domain("frequency grid is empty"))
}

/// Checks `a_i(x) > sqrt|theta|/2 |b_i(x)|` for both coordinates on `x_grid`.
pub fn verify_main_inequality(
    hurst: &HurstPair,
    theta: f64,
    x_grid: &[f64],
) -> Result<VerificationReport> {
    if !theta.is_finite() {
        return Err(domain(format!("theta must be finite, got {theta}")));
    }
    let mut report = VerificationReport::new(
        "main_inequality",
        json!({ "hurst": hurst, "theta": theta, "grid_points": x_grid.len() }),
    );
    let half_root = 0.5 * theta.abs().sqrt();
    for (i, h) in hurst.as_array().into_iter().enumerate() {
        let w = worst_margin(h, half_root, x_grid)?;
        report.push(CheckRecord::above(
            format!("main_inequality.h{}", i + 1),
            json!({
                "h": h,
                "theta": theta,
                "argmin_x": w.x,
                "relative_margin": w.relative,
                "series_tol": SCAN_SERIES_TOL,
            }),
            w.margin,
            0.0,
        ));
    }
    Ok(report)
}

/// Builds the Gram matrix `G_ij = R(p_i - p_j)` and checks
/// `lambda_min >= -jitter_tol * lambda_max`.
pub fn verify_psd_gram<K: StationaryCovariance>(
    kernel: &K,
    points: &[[f64; 2]],
    jitter_tol: f64,
) -> Result<VerificationReport> {
    let n = points.len();
    if !(2..=MAX_GRAM_POINTS).contains(&n) {
        return Err(Error::InvalidGrid(format!(
            "Gram check needs 2..={MAX_GRAM_POINTS} points, got {n}"
        )));
    }
    if points
        .iter()
        .any(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(Error::InvalidGrid("points must be finite".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidGrid("points must be distinct".into()));
    }
    if jitter_tol.is_nan() || jitter_tol < 0.0 {
        return Err(domain(format!(
            "jitter tolerance must be >= 0, got {jitter_tol}"
        )));
    }

    let gram = gram_matrix(kernel, points);
    let eigen = SymmetricEigen::try_new(gram, f64::EPSILON, 1_000_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence for {n} x {n} Gram matrix")))?;
    let (lmin, lmax) = eigen
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
    if lmax.is_nan() || lmax <= 0.0 {
        return Err(Error::Eigen(format!("Gram matrix has lambda_max = {lmax}")));
    }

    let mut report = VerificationReport::new(
        "psd_gram",
        json!({ "kernel": kernel.describe(), "points": n, "jitter_tol": jitter_tol }),
    );
    report.push(CheckRecord::at_least(
        "psd_gram.lambda_ratio",
        json!({ "lambda_min": lmin, "lambda_max": lmax, "points": n }),
        lmin / lmax,
        -jitter_tol,
    ));
    Ok(report)
}

/// `G_ij = R(p_i - p_j)`, exactly symmetric.
pub fn gram_matrix<K: StationaryCovariance>(kernel: &K, points: &[[f64; 2]]) -> DMatrix<f64> {
    let n = points.len();
    let rows = par::map_indexed(n, |i| {
        (i..n)
            .map(|j| kernel.eval([points[i][0] - points[j][0], points[i][1] - points[j][1]]))
            .collect::<Vec<_>>()
    });
    let mut g = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            g[(i, i + k)] = v;
            g[(i + k, i)] = v;
        }
    }
    g
}

/// Spectral density of `R_theta` on a product grid of frequencies,
/// `a1(x) a2(y) - theta/4 b1(x) b2(y)`, checked against `-tol`, plus the
/// absolute integrability bound that makes the density well defined.
pub fn fourier_inversion_scan(
    kernel: &StationaryKernel,
    x_grid: &[f64],
    y_grid: &[f64],
    tol: f64,
) -> Result<VerificationReport> {
    if x_grid.is_empty() || y_grid.is_empty() {
        return Err(domain("frequency grids must be non-empty"));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(domain(format!("tolerance must be >= 0, got {tol}")));
    }
    let [h1, h2] = kernel.hurst.as_array();
    let theta = kernel.theta;
    let mut report = VerificationReport::new(
        "fourier_inversion",
        json!({
            "kernel": kernel.describe(),
            "grid": [x_grid.len(), y_grid.len()],
            "tol": tol,
        }),
    );

    // int |R_theta| <= (1/4 + |theta|/16) prod_i int F_{H_i}
    let weight = 0.25 + theta.abs() / 16.0;
    let m1 = 2.0 * a_series_value(h1, 0.0, SCAN_SERIES_TOL)?.value;
    let m2 = 2.0 * a_series_value(h2, 0.0, SCAN_SERIES_TOL)?.value;
    let (b1, b2) = (total_mass_bound(h1)?, total_mass_bound(h2)?);
    report.push(CheckRecord::at_most(
        "fourier_inversion.integrability",
        json!({ "marginal_mass": [m1, m2], "marginal_bound": [b1, b2] }),
        weight * m1 * m2,
        weight * b1 * b2,
    ));

    let side = |h: f64, grid: &[f64]| -> Result<Vec<(f64, f64)>> {
        par::map_slice(grid, |&x| -> Result<(f64, f64)> {
            Ok((
                a_series_value(h, x, SCAN_SERIES_TOL)?.value,
                b_series_value(h, x, SCAN_SERIES_TOL)?.value,
            ))
        })
        .into_iter()
        .collect()
    };
    let xs = side(h1, x_grid)?;
    let ys = side(h2, y_grid)?;
    let mut min = (f64::INFINITY, 0.0, 0.0);
    for (i, (a1, bb1)) in xs.iter().enumerate() {
        for (j, (a2, bb2)) in ys.iter().enumerate() {
            let d = a1 * a2 - 0.25 * theta * bb1 * bb2;
            if d < min.0 {
                min = (d, x_grid[i], y_grid[j]);
            }
        }
    }
    report.push(CheckRecord::at_least(
        "fourier_inversion.min_density",
        json!({ "argmin": [min.1, min.2], "series_tol": SCAN_SERIES_TOL }),
        min.0,
        -tol,
    ));
    Ok(report)
}

/// `n` points spaced logarithmically on `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}
