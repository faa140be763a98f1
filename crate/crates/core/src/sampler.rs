//! Exact Gaussian simulation of lifted fields on finite point sets.
//!
//! The covariance matrix is assembled from [`FieldCovariance`] and factored
//! by a symmetric eigendecomposition, `C ~ L L^T` with
//! `L = V diag(sqrt(lambda))` over the eigenvalues above
//! `clip_tol * lambda_max`. Points on the coordinate axes carry exactly
//! zero variance and are left out of the factor.
//!
//! Path `p` uses the normal stream `(seed, p)`, so a path can be redrawn on
//! its own and the output does not depend on how paths are scheduled.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::StationaryCovariance;
use crate::lamperti::{FieldCovariance, RectIncrement};
use crate::par;
use crate::report::{format_sig17, VerificationReport};
use crate::rng::NormalStream;
use crate::spectral::{ThetaCertificate, DEFAULT_JITTER_TOL};

pub const MAX_GRID_POINTS: usize = 4096;
pub const DEFAULT_CLIP_TOL: f64 = 1e-12;

#[derive(Deserialize)]
struct RawGrid {
    t1_points: Vec<f64>,
    t2_points: Vec<f64>,
    #[serde(default)]
    include_axes: bool,
}

/// Tensor grid `t1_points x t2_points`, optionally with the zero row and
/// column prepended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridSpec {
    t1_points: Vec<f64>,
    t2_points: Vec<f64>,
    include_axes: bool,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(r: RawGrid) -> Result<Self> {
        Self::new(r.t1_points, r.t2_points, r.include_axes)
    }
}

fn check_axis(name: &str, pts: &[f64]) -> Result<()> {
    if pts.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} is empty")));
    }
    if pts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidGrid(format!(
            "{name} must be finite and positive"
        )));
    }
    if pts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

impl GridSpec {
    pub fn new(t1_points: Vec<f64>, t2_points: Vec<f64>, include_axes: bool) -> Result<Self> {
        check_axis("t1_points", &t1_points)?;
        check_axis("t2_points", &t2_points)?;
        let n = t1_points.len() * t2_points.len();
        if n > MAX_GRID_POINTS {
            return Err(Error::InvalidGrid(format!(
                "{n} grid points exceed the limit of {MAX_GRID_POINTS}"
            )));
        }
        Ok(Self {
            t1_points,
            t2_points,
            include_axes,
        })
    }

    pub fn t1_points(&self) -> &[f64] {
        &self.t1_points
    }

    pub fn t2_points(&self) -> &[f64] {
        &self.t2_points
    }

    pub fn include_axes(&self) -> bool {
        self.include_axes
    }

    fn with_axis(&self, pts: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(pts.len() + 1);
        if self.include_axes {
            out.push(0.0);
        }
        out.extend_from_slice(pts);
        out
    }

    /// Row coordinates, including 0 when axes are included.
    pub fn t1_coords(&self) -> Vec<f64> {
        self.with_axis(&self.t1_points)
    }

    pub fn t2_coords(&self) -> Vec<f64> {
        self.with_axis(&self.t2_points)
    }

    /// `(rows, cols)` of a sample matrix.
    pub fn shape(&self) -> (usize, usize) {
        let a = usize::from(self.include_axes);
        (self.t1_points.len() + a, self.t2_points.len() + a)
    }

    /// Every grid point in row-major order, axes included.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let c2 = self.t2_coords();
        self.t1_coords()
            .into_iter()
            .flat_map(|a| c2.iter().map(move |b| [a, *b]))
            .collect()
    }

    /// Off-axis grid points mapped to log coordinates.
    pub fn log_points(&self) -> Vec<[f64; 2]> {
        self.t1_points
            .iter()
            .flat_map(|a| self.t2_points.iter().map(move |b| [a.ln(), b.ln()]))
            .collect()
    }
}

/// Evidence that a kernel is positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsdCertificate {
    Theta(ThetaCertificate),
    /// A passing [`crate::spectral::verify_psd_gram`] report for the kernel.
    Gram {
        kernel: String,
        report: VerificationReport,
    },
}

impl PsdCertificate {
    pub fn gram<K: StationaryCovariance>(kernel: &K, report: VerificationReport) -> Self {
        Self::Gram {
            kernel: kernel.describe(),
            report,
        }
    }

    /// `Ok` when the certificate covers `kernel`.
    pub fn check<K: StationaryCovariance>(&self, kernel: &K) -> Result<()> {
        match self {
            Self::Theta(c) => match kernel.as_theta_kernel() {
                Some(k) if c.admits(&k) => Ok(()),
                Some(k) => Err(Error::NotCertified(format!(
                    "{} is outside the certified range |theta| <= {:e} for H = ({}, {})",
                    k.describe(),
                    c.theta_bound,
                    c.hurst.h1(),
                    c.hurst.h2()
                ))),
                None => Err(Error::NotCertified(format!(
                    "theta certificate does not apply to {}",
                    kernel.describe()
                ))),
            },
            Self::Gram {
                kernel: desc,
                report,
            } => {
                let bound = report.config.get("kernel").and_then(|v| v.as_str());
                if *desc != kernel.describe() || bound != Some(desc.as_str()) {
                    Err(Error::NotCertified(format!(
                        "Gram certificate is for '{desc}', not '{}'",
                        kernel.describe()
                    )))
                } else if report.name != "psd_gram" || !report.pass {
                    Err(Error::NotCertified(format!(
                        "Gram scan did not pass for '{desc}'"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// `L` with `L L^T` equal to the covariance of the field at `points`.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    points: Vec<[f64; 2]>,
    active: Vec<usize>,
    loadings: DMatrix<f64>,
    grid: Option<GridSpec>,
    kernel: String,
    clip_tol: f64,
    lambda_min: f64,
    lambda_max: f64,
    clipped: usize,
}

impl CovarianceFactor {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn kernel(&self) -> &str {
        &self.kernel
    }

    /// Number of normals consumed per path.
    pub fn rank(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn clip_tol(&self) -> f64 {
        self.clip_tol
    }

    /// Smallest eigenvalue before clipping.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Eigenvalues dropped by clipping.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Field values at the points for the given standard normals.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.points.len()];
        for (row, &idx) in self.active.iter().enumerate() {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate().take(self.rank()) {
                acc += self.loadings[(row, k)] * zk;
            }
            out[idx] = acc;
        }
        out
    }

    /// Field values at the points for path `path` of `seed`.
    pub fn draw(&self, seed: u64, path: u64) -> Vec<f64> {
        let mut z = vec![0.0; self.rank()];
        NormalStream::new(seed, path).fill_normals(&mut z);
        self.apply(&z)
    }

    /// `L L^T` on all points (zero rows and columns for axis points).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.points.len();
        let small = &self.loadings * self.loadings.transpose();
        let mut full = DMatrix::zeros(n, n);
        for (a, &i) in self.active.iter().enumerate() {
            for (b, &j) in self.active.iter().enumerate() {
                full[(i, j)] = small[(a, b)];
            }
        }
        full
    }
}

/// Factor the field covariance at arbitrary quarter-plane points.
pub fn factorize_points<K: StationaryCovariance>(
    fc: &FieldCovariance<K>,
    points: &[[f64; 2]],
    certificate: &PsdCertificate,
    clip_tol: f64,
) -> Result<CovarianceFactor> {
    certificate.check(fc.kernel())?;
    if !(0.0..1.0).contains(&clip_tol) {
        return Err(Error::Domain(format!(
            "clip_tol must lie in [0, 1), got {clip_tol}"
        )));
    }
    if points.len() > MAX_GRID_POINTS {
        return Err(Error::InvalidGrid(format!(
            "{} points exceed the limit of {MAX_GRID_POINTS}",
            points.len()
        )));
    }
    for p in points {
        crate::kernels::check_quarter_plane(*p)?;
    }
    let active: Vec<usize> = (0..points.len())
        .filter(|&i| points[i][0] > 0.0 && points[i][1] > 0.0)
        .collect();
    let m = active.len();
    let base = CovarianceFactor {
        points: points.to_vec(),
        active: active.clone(),
        loadings: DMatrix::zeros(m, 0),
        grid: None,
        kernel: fc.kernel().describe(),
        clip_tol,
        lambda_min: 0.0,
        lambda_max: 0.0,
        clipped: 0,
    };
    if m == 0 {
        return Ok(base);
    }

    let rows = par::map_indexed(m, |a| {
        (a..m)
            .map(|b| fc.eval(points[active[a]], points[active[b]]))
            .collect::<Vec<_>>()
    });
    let mut cov = DMatrix::zeros(m, m);
    for (a, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            cov[(a, a + k)] = v;
            cov[(a + k, a)] = v;
        }
    }
    let eigen = SymmetricEigen::try_new(cov, f64::EPSILON, 1_000_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence for {m} x {m} covariance")))?;
    let lambda_max = eigen.eigenvalues.max();
    let lambda_min = eigen.eigenvalues.min();
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        return Err(Error::Eigen(format!(
            "covariance has lambda_max = {lambda_max}"
        )));
    }
    if lambda_min < -DEFAULT_JITTER_TOL * lambda_max {
        return Err(Error::Eigen(format!(
            "covariance has eigenvalue {lambda_min:e} below -{DEFAULT_JITTER_TOL:e} * lambda_max"
        )));
    }
    let floor = clip_tol * lambda_max;
    let kept: Vec<usize> = (0..m).filter(|&k| eigen.eigenvalues[k] > floor).collect();
    let mut loadings = DMatrix::zeros(m, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        let mut v: DVector<f64> = eigen.eigenvectors.column(k).into_owned();
        // fix the sign so the factor is reproducible
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v.neg_mut();
        }
        loadings.set_column(col, &(v * eigen.eigenvalues[k].sqrt()));
    }
    Ok(CovarianceFactor {
        loadings,
        lambda_min,
        lambda_max,
        clipped: m - kept.len(),
        ..base
    })
}

/// Factor the field covariance on every point of `grid` (row-major).
pub fn factorize_covariance<K: StationaryCovariance>(
    fc: &FieldCovariance<K>,
    grid: &GridSpec,
    certificate: &PsdCertificate,
    clip_tol: f64,
) -> Result<CovarianceFactor> {
    let mut f = factorize_points(fc, &grid.points(), certificate, clip_tol)?;
    f.grid = Some(grid.clone());
    Ok(f)
}

/// One simulated field on a grid; `values[i][j] = X(t1_i, t2_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub grid: GridSpec,
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
    pub path: u64,
    pub kernel: String,
}

impl GridSample {
    fn index(coords: &[f64], t: f64) -> Option<usize> {
        coords.iter().position(|c| *c == t)
    }

    pub fn value_at(&self, t: [f64; 2]) -> Result<f64> {
        let i = Self::index(&self.grid.t1_coords(), t[0]);
        let j = Self::index(&self.grid.t2_coords(), t[1]);
        match (i, j) {
            (Some(i), Some(j)) => Ok(self.values[i][j]),
            _ => Err(Error::OffGrid(t[0], t[1])),
        }
    }

    /// Row-major CSV: a header of `t2` coordinates, then one row per `t1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t1\\t2");
        for t in self.grid.t2_coords() {
            out.push(',');
            out.push_str(&format_sig17(t));
        }
        out.push('\n');
        for (t, row) in self.grid.t1_coords().iter().zip(&self.values) {
            out.push_str(&format_sig17(*t));
            for v in row {
                out.push(',');
                out.push_str(&format_sig17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Draw `n_paths` grid samples; path `p` uses normal stream `(seed, p)`.
pub fn sample(factor: &CovarianceFactor, seed: u64, n_paths: usize) -> Result<Vec<GridSample>> {
    let grid = factor
        .grid
        .as_ref()
        .ok_or_else(|| Error::InvalidGrid("factor was not built on a grid".into()))?;
    let (_, cols) = grid.shape();
    Ok(par::map_indexed(n_paths, |p| {
        let flat = factor.draw(seed, p as u64);
        GridSample {
            grid: grid.clone(),
            values: flat.chunks(cols).map(|r| r.to_vec()).collect(),
            seed,
            path: p as u64,
            kernel: factor.kernel.clone(),
        }
    }))
}

/// `X(v1,v2) - X(u1,v2) - X(v1,u2) + X(u1,u2)` for grid corners `u`, `v`.
/// Degenerate rectangles are allowed and give 0.
pub fn increment_at(sample: &GridSample, lower: [f64; 2], upper: [f64; 2]) -> Result<f64> {
    let top = sample.value_at(upper)? - sample.value_at([lower[0], upper[1]])?;
    let bottom = sample.value_at([upper[0], lower[1]])? - sample.value_at(lower)?;
    Ok(top - bottom)
}

/// `Δ_u X(v)` over a rectangle whose corners are grid points.
pub fn rectangular_increments(sample: &GridSample, rect: &RectIncrement) -> Result<f64> {
    increment_at(sample, rect.lower, rect.upper)
}
