//! Monte Carlo hypothesis tests on simulated fields.
//!
//! Means are known to be zero, so variances and cross-moments are plain
//! averages of squares and products.
//!
//! * [`test_increment_stationarity`]: for each pair of congruent rectangles,
//!   an `F(n, n)` test that the two increment variances agree and two
//!   `chi^2(n)` tests against `(dt1)^{2H1} (dt2)^{2H2}`, Bonferroni-corrected
//!   over all tests. The base rectangles use paths `0..n` and the shifted
//!   ones `n..2n`, so the two variance estimates are independent.
//! * [`test_not_fbs`]: z-test of `E[X(t) X(s)]` at `t = (e, 1)`, `s = (1, e)`
//!   against the fractional Brownian sheet value. Only the two witness
//!   points are simulated; normals come from a dedicated stream of the
//!   seed (path `p` reads normals `r p .. r p + r`, `r` the factor rank)
//!   and the sums are streamed, so very large path counts stay cheap.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};

use crate::error::{domain, Error, Result};
use crate::kernels::{fbs_covariance, StationaryCovariance};
use crate::lamperti::{FieldCovariance, RectIncrement};
use crate::par;
use crate::report::CheckRecord;
use crate::rng::NormalStream;
use crate::sampler::{factorize_points, GridSample, PsdCertificate, DEFAULT_CLIP_TOL};
use crate::spectral::NeumaierSum;

pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;
pub const MIN_INCREMENT_PATHS: usize = 1000;

/// Normal stream reserved for the witness test.
pub const WITNESS_STREAM: u64 = u64::MAX;

/// Witness points `t = (e, 1)` and `s = (1, e)`; their log-lag is `(1, -1)`.
pub const WITNESS: [[f64; 2]; 2] = [[E, 1.0], [1.0, E]];

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    Bonferroni,
}

/// Two rectangles with identical side lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectPair {
    pub base: RectIncrement,
    pub shifted: RectIncrement,
}

impl RectPair {
    pub fn new(base: RectIncrement, shifted: RectIncrement) -> Result<Self> {
        let (a, b) = (base.sides(), shifted.sides());
        for k in 0..2 {
            if (a[k] - b[k]).abs() > 1e-12 * a[k].max(b[k]) {
                return Err(domain(format!(
                    "rectangles are not congruent: sides {a:?} and {b:?}"
                )));
            }
        }
        Ok(Self { base, shifted })
    }

    /// `base` and its translate by `shift`.
    pub fn translate(base: RectIncrement, shift: [f64; 2]) -> Result<Self> {
        Self::new(base, base.translated(shift)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementTestConfig {
    pub n_paths: usize,
    pub pairs: Vec<RectPair>,
    pub significance: f64,
    #[serde(default)]
    pub correction: Correction,
}

impl IncrementTestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_INCREMENT_PATHS {
            return Err(domain(format!(
                "n_paths must be at least {MIN_INCREMENT_PATHS}, got {}",
                self.n_paths
            )));
        }
        if self.pairs.is_empty() {
            return Err(domain("no rectangle pairs configured"));
        }
        for p in &self.pairs {
            RectPair::new(p.base, p.shifted)?;
        }
        check_significance(self.significance)
    }
}

fn check_significance(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "significance must lie in (0, 1), got {alpha}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotFbsConfig {
    pub n_paths: u64,
    pub significance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    /// `">="` for conformance tests, `"<"` when passing means rejecting.
    pub comparison: String,
    /// Significance level after correction.
    pub threshold: f64,
    pub pass: bool,
    pub description: String,
}

impl TestOutcome {
    fn conformance(
        name: String,
        statistic: f64,
        p_value: f64,
        threshold: f64,
        description: String,
    ) -> Self {
        Self {
            name,
            statistic,
            p_value,
            comparison: ">=".into(),
            threshold,
            pass: p_value >= threshold,
            description,
        }
    }

    /// The outcome as a report check on its p-value.
    pub fn to_check(&self) -> CheckRecord {
        CheckRecord {
            name: self.name.clone(),
            inputs: json!({ "statistic": self.statistic, "description": self.description }),
            statistic: self.p_value,
            comparison: self.comparison.clone(),
            threshold: self.threshold,
            pass: self.pass,
        }
    }
}

fn two_sided<D: ContinuousCDF<f64, f64>>(d: &D, x: f64) -> f64 {
    (2.0 * d.cdf(x).min(d.sf(x))).clamp(0.0, 1.0)
}

/// Index of each rectangle corner in a deduplicated point list.
type CornerLayout = Vec<[(usize, f64); 4]>;

fn corner_layout(rects: &[RectIncrement]) -> (Vec<[f64; 2]>, CornerLayout) {
    let mut points: Vec<[f64; 2]> = Vec::new();
    let layout = rects
        .iter()
        .map(|r| {
            r.signed_corners().map(|(p, sign)| {
                let idx = points.iter().position(|q| *q == p).unwrap_or_else(|| {
                    points.push(p);
                    points.len() - 1
                });
                (idx, sign)
            })
        })
        .collect();
    (points, layout)
}

/// Congruent-rectangle variance tests; see the module docs.
pub fn test_increment_stationarity<K: StationaryCovariance>(
    kernel: &K,
    certificate: &PsdCertificate,
    config: &IncrementTestConfig,
    seed: u64,
) -> Result<Vec<TestOutcome>> {
    config.validate()?;
    let n = config.n_paths;
    let m = config.pairs.len();
    let rects: Vec<RectIncrement> = config
        .pairs
        .iter()
        .flat_map(|p| [p.base, p.shifted])
        .collect();
    let (points, layout) = corner_layout(&rects);
    let fc = FieldCovariance::new(kernel);
    let factor = factorize_points(&fc, &points, certificate, DEFAULT_CLIP_TOL)?;

    // sums of squared increments: [base_0, shifted_0, base_1, ...]
    let sums = par::chunked_fold(
        2 * n,
        CHUNK,
        |range| {
            let mut acc = vec![NeumaierSum::default(); 2 * m];
            for p in range {
                let x = factor.draw(seed, p as u64);
                let side = usize::from(p >= n);
                for k in 0..m {
                    let d: f64 = layout[2 * k + side].iter().map(|(i, s)| s * x[*i]).sum();
                    acc[2 * k + side].add(d * d);
                }
            }
            acc
        },
        vec![NeumaierSum::default(); 2 * m],
        |mut tot, part| {
            for (t, v) in tot.iter_mut().zip(part) {
                t.add(v.value());
            }
            tot
        },
    );

    let hurst = kernel.hurst();
    let alpha = config.significance / (3 * m) as f64;
    let nf = n as f64;
    let f_dist = FisherSnedecor::new(nf, nf).map_err(|e| domain(e.to_string()))?;
    let chi = ChiSquared::new(nf).map_err(|e| domain(e.to_string()))?;
    let mut out = Vec::with_capacity(3 * m);
    for (k, pair) in config.pairs.iter().enumerate() {
        let [d1, d2] = pair.base.sides();
        let truth = d1.powf(2.0 * hurst.h1()) * d2.powf(2.0 * hurst.h2());
        let vb = sums[2 * k].value() / nf;
        let vs = sums[2 * k + 1].value() / nf;
        let ratio = vb / vs;
        let corners = format!(
            "base {:?}-{:?}, shifted {:?}-{:?}",
            pair.base.lower, pair.base.upper, pair.shifted.lower, pair.shifted.upper
        );
        out.push(TestOutcome::conformance(
            format!("stationarity.pair{k}.variance_ratio"),
            ratio,
            two_sided(&f_dist, ratio),
            alpha,
            format!(
                "F({n}, {n}) test of equal increment variances; {corners}; variances {vb} and {vs}"
            ),
        ));
        for (label, v) in [("base", vb), ("shifted", vs)] {
            let stat = nf * v / truth;
            out.push(TestOutcome::conformance(
                format!("stationarity.pair{k}.{label}_chi2"),
                stat,
                two_sided(&chi, stat),
                alpha,
                format!(
                    "chi2({n}) test of {label} variance {v} against (dt1)^(2H1) (dt2)^(2H2) = {truth}; {corners}"
                ),
            ));
        }
    }
    Ok(out)
}

/// Analytic quantities at the witness pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessGap {
    pub field: f64,
    pub fbs: f64,
    pub gap: f64,
    /// `Var(X(t) X(s)) = C(t,t) C(s,s) + C(t,s)^2`.
    pub product_variance: f64,
}

impl WitnessGap {
    pub fn standard_error(&self, n_paths: u64) -> f64 {
        (self.product_variance / n_paths as f64).sqrt()
    }

    /// Paths needed for `|gap| >= 5` standard errors.
    pub fn required_paths(&self) -> u64 {
        (25.0 * self.product_variance / (self.gap * self.gap)).ceil() as u64
    }
}

pub fn witness_gap<K: StationaryCovariance>(kernel: &K) -> Result<WitnessGap> {
    let fc = FieldCovariance::new(kernel);
    let [t, s] = WITNESS;
    let field = fc.eval(t, s);
    let fbs = fbs_covariance(&kernel.hurst(), t, s)?;
    Ok(WitnessGap {
        field,
        fbs,
        gap: field - fbs,
        product_variance: fc.eval(t, t) * fc.eval(s, s) + field * field,
    })
}

/// Mean of `x` with the delete-one jackknife standard error
/// `sqrt(sum (x - mean)^2 / (n (n - 1)))`, from running sums.
pub fn mean_and_jackknife_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let ss = (sum_sq - nf * mean * mean).max(0.0);
    (mean, (ss / (nf * (nf - 1.0))).sqrt())
}

/// Monte Carlo test that the field is not the fractional Brownian sheet.
/// Passing means the fBs value of `E[X(t) X(s)]` is rejected at the
/// configured level.
pub fn test_not_fbs<K: StationaryCovariance>(
    kernel: &K,
    certificate: &PsdCertificate,
    config: &NotFbsConfig,
    seed: u64,
) -> Result<TestOutcome> {
    check_significance(config.significance)?;
    let n = config.n_paths;
    if n < 2 {
        return Err(domain("witness test needs at least 2 paths"));
    }
    let w = witness_gap(kernel)?;
    let predicted_se = w.standard_error(n);
    let null_kernel = kernel.as_theta_kernel().is_some_and(|k| k.is_r0());
    if !null_kernel && w.gap.abs() < 5.0 * predicted_se {
        return Err(Error::DegenerateWitness {
            gap: w.gap,
            standard_error: predicted_se,
            required_paths: w.required_paths(),
        });
    }

    let fc = FieldCovariance::new(kernel);
    let factor = factorize_points(&fc, &WITNESS, certificate, DEFAULT_CLIP_TOL)?;
    let r = factor.rank();
    let mut l = [[0.0; 2]; 2];
    for (k, row) in l.iter_mut().enumerate().take(r) {
        let mut z = [0.0; 2];
        z[k] = 1.0;
        let col = factor.apply(&z[..r]);
        *row = [col[0], col[1]];
    }
    let n_usize = usize::try_from(n).map_err(|_| domain("n_paths too large"))?;
    let (s1, s2) = par::chunked_fold(
        n_usize,
        CHUNK * 16,
        |range| {
            let mut stream = NormalStream::new(seed, WITNESS_STREAM);
            stream.seek((r * range.start) as u64);
            let (mut a, mut b) = (NeumaierSum::default(), NeumaierSum::default());
            for _ in range {
                let (mut xt, mut xs) = (0.0, 0.0);
                for row in l.iter().take(r) {
                    let z = stream.next_normal();
                    xt += row[0] * z;
                    xs += row[1] * z;
                }
                let p = xt * xs;
                a.add(p);
                b.add(p * p);
            }
            (a, b)
        },
        (NeumaierSum::default(), NeumaierSum::default()),
        |(mut a, mut b), (pa, pb)| {
            a.add(pa.value());
            b.add(pb.value());
            (a, b)
        },
    );
    let (mean, se) = mean_and_jackknife_se(s1.value(), s2.value(), n);
    let z = (mean - w.fbs) / se;
    let p_value = (2.0 * Normal::standard().sf(z.abs())).clamp(0.0, 1.0);
    Ok(TestOutcome {
        name: "not_fbs.witness".into(),
        statistic: z,
        p_value,
        comparison: "<".into(),
        threshold: config.significance,
        pass: p_value < config.significance,
        description: format!(
            "z-test of E[X(e,1) X(1,e)] = {} (fBs) with {n} paths: estimate {mean}, jackknife SE {se}; \
             analytic field value {}, gap {:e} = {:.3} predicted SE",
            w.fbs,
            w.field,
            w.gap,
            w.gap.abs() / predicted_se
        ),
    })
}

/// Cross-moment estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub i: [usize; 2],
    pub j: [usize; 2],
    pub value: f64,
    pub standard_error: f64,
}

/// `E[X_i X_j]` for each pair of grid indices, averaged over samples.
pub fn empirical_covariance(
    samples: &[GridSample],
    pairs: &[([usize; 2], [usize; 2])],
) -> Result<Vec<CovarianceEntry>> {
    if samples.len() < 2 {
        return Err(domain("empirical covariance needs at least 2 paths"));
    }
    let shape = samples[0].grid.shape();
    let inside = |ix: [usize; 2]| ix[0] < shape.0 && ix[1] < shape.1;
    if let Some((i, j)) = pairs.iter().find(|(i, j)| !(inside(*i) && inside(*j))) {
        return Err(Error::InvalidGrid(format!(
            "index pair {i:?}, {j:?} outside a {shape:?} grid"
        )));
    }
    if samples.iter().any(|s| s.grid.shape() != shape) {
        return Err(Error::InvalidGrid("samples have different grids".into()));
    }
    let n = samples.len() as u64;
    Ok(par::map_slice(pairs, |&(i, j)| {
        let (mut a, mut b) = (NeumaierSum::default(), NeumaierSum::default());
        for s in samples {
            let p = s.values[i[0]][i[1]] * s.values[j[0]][j[1]];
            a.add(p);
            b.add(p * p);
        }
        let (value, standard_error) = mean_and_jackknife_se(a.value(), b.value(), n);
        CovarianceEntry {
            i,
            j,
            value,
            standard_error,
        }
    }))
}
