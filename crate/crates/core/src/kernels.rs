//! Stationary kernels and the fractional Brownian sheet covariance.
//!
//! `F_H(v) = 2 cosh(Hv) - |2 sinh(v/2)|^{2H}` is the stationary covariance
//! of fractional Brownian motion after the Lamperti change of variables.
//! Products of two of them give `R0`, the stationary covariance behind the
//! fractional Brownian sheet, and the one-parameter family
//!
//! ```text
//! R_theta(v) = R0(v) * (1 + theta * e^{-H1|v1| - H2|v2|} sinh(H1 v1) sinh(H2 v2))
//! ```
//!
//! shares the folded sum `R(v) + R(v1, -v2) = 2 R0(v)` with `R0` while
//! differing from it pointwise whenever `theta != 0`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Hurst index pair `(H1, H2)`, both strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct HurstPair {
    h1: f64,
    h2: f64,
}

impl HurstPair {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        check_hurst(h1)?;
        check_hurst(h2)?;
        Ok(Self { h1, h2 })
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.h1, self.h2]
    }

    pub fn swapped(&self) -> Self {
        Self {
            h1: self.h2,
            h2: self.h1,
        }
    }
}

impl TryFrom<[f64; 2]> for HurstPair {
    type Error = crate::Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<HurstPair> for [f64; 2] {
    fn from(h: HurstPair) -> Self {
        h.as_array()
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("Hurst index must lie in (0, 1), got {h}")))
    }
}

/// A stationary covariance on `R^2` together with the Hurst pair used to
/// lift it to a self-similar field.
pub trait StationaryCovariance: Send + Sync {
    fn hurst(&self) -> HurstPair;

    fn eval(&self, v: [f64; 2]) -> f64;

    /// Short stable descriptor, used to bind certificates and reports to a kernel.
    fn describe(&self) -> String;

    /// The `R_theta` parameters, when the kernel is one.
    fn as_theta_kernel(&self) -> Option<StationaryKernel> {
        None
    }
}

impl<K: StationaryCovariance + ?Sized> StationaryCovariance for &K {
    fn hurst(&self) -> HurstPair {
        (**self).hurst()
    }

    fn eval(&self, v: [f64; 2]) -> f64 {
        (**self).eval(v)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }

    fn as_theta_kernel(&self) -> Option<StationaryKernel> {
        (**self).as_theta_kernel()
    }
}

/// `R_theta` for a Hurst pair; `theta == 0` is `R0`.
///
/// `theta` is not restricted here. Whether the kernel is positive definite
/// is a separate question answered by [`crate::spectral`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryKernel {
    pub hurst: HurstPair,
    pub theta: f64,
}

impl StationaryKernel {
    pub fn new(hurst: HurstPair, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(domain(format!("theta must be finite, got {theta}")));
        }
        Ok(Self { hurst, theta })
    }

    pub fn r0(hurst: HurstPair) -> Self {
        Self { hurst, theta: 0.0 }
    }

    pub fn is_r0(&self) -> bool {
        self.theta == 0.0
    }
}

impl StationaryCovariance for StationaryKernel {
    fn hurst(&self) -> HurstPair {
        self.hurst
    }

    fn eval(&self, v: [f64; 2]) -> f64 {
        r_theta(self, v)
    }

    fn describe(&self) -> String {
        format!(
            "R_theta(H1={:?}, H2={:?}, theta={:?})",
            self.hurst.h1, self.hurst.h2, self.theta
        )
    }

    fn as_theta_kernel(&self) -> Option<StationaryKernel> {
        Some(*self)
    }
}

/// `R0` with a first-coordinate Hurst index that differs from the one used
/// for the Lamperti lift.
///
/// The kernel is positive definite (a product of two `F_H`) but breaks the
/// folded-sum identity, so the lifted field has increment variances that
/// depend on the rectangle position. Used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetunedKernel {
    pub nominal: HurstPair,
    pub actual: HurstPair,
}

impl StationaryCovariance for DetunedKernel {
    fn hurst(&self) -> HurstPair {
        self.nominal
    }

    fn eval(&self, v: [f64; 2]) -> f64 {
        r0(&self.actual, v)
    }

    fn describe(&self) -> String {
        format!(
            "detuned R0(actual H1={:?}, H2={:?}; lifted with H1={:?}, H2={:?})",
            self.actual.h1, self.actual.h2, self.nominal.h1, self.nominal.h2
        )
    }
}

/// `F_H(v) = 2 cosh(Hv) - |2 sinh(v/2)|^{2H}`.
pub fn f_h(h: f64, v: f64) -> Result<f64> {
    check_hurst(h)?;
    if v.is_nan() {
        return Err(domain("lag is NaN"));
    }
    Ok(f_h_unchecked(h, v))
}

/// `F_H` without argument validation; `h` must lie in `(0, 1)`.
///
/// Away from the origin the kernel is evaluated as
/// `e^{-H|v|} + e^{H|v|} (1 - (1 - e^{-|v|})^{2H})`, which is a sum of two
/// positive terms and keeps full relative accuracy for large lags.
#[inline]
pub(crate) fn f_h_unchecked(h: f64, v: f64) -> f64 {
    let a = v.abs();
    if a <= 1.0 {
        2.0 * (h * a).cosh() - (2.0 * (0.5 * a).sinh()).powf(2.0 * h)
    } else if a.is_infinite() {
        0.0
    } else {
        // ln(1 - e^{-a}) without cancellation
        let log_one_minus = (-(-a).exp()).ln_1p();
        let tail = -(2.0 * h * log_one_minus).exp_m1();
        (-h * a).exp() + tail * (h * a).exp()
    }
}

/// `e^{-H|v|} sinh(Hv)`, written as `sign(v) (1 - e^{-2H|v|}) / 2`.
#[inline]
pub(crate) fn modulation(h: f64, v: f64) -> f64 {
    let m = -0.5 * (-2.0 * h * v.abs()).exp_m1();
    if v < 0.0 {
        -m
    } else {
        m
    }
}

/// `R0(v) = F_{H1}(v1) F_{H2}(v2) / 4`.
pub fn r0(hurst: &HurstPair, v: [f64; 2]) -> f64 {
    0.25 * f_h_unchecked(hurst.h1, v[0]) * f_h_unchecked(hurst.h2, v[1])
}

/// `R_theta(v)`; equals [`r0`] when `theta == 0`.
pub fn r_theta(kernel: &StationaryKernel, v: [f64; 2]) -> f64 {
    let h = &kernel.hurst;
    let base = r0(h, v);
    if kernel.theta == 0.0 {
        return base;
    }
    base * (1.0 + kernel.theta * modulation(h.h1, v[0]) * modulation(h.h2, v[1]))
}

/// Covariance of the normalized fractional Brownian sheet,
/// `2^{-2} prod_i (t_i^{2H_i} + s_i^{2H_i} - |t_i - s_i|^{2H_i})`.
pub fn fbs_covariance(hurst: &HurstPair, t: [f64; 2], s: [f64; 2]) -> Result<f64> {
    check_quarter_plane(t)?;
    check_quarter_plane(s)?;
    Ok(fbm_factor(hurst.h1, t[0], s[0]) * fbm_factor(hurst.h2, t[1], s[1]) * 0.25)
}

/// `t^{2H} + s^{2H} - |t - s|^{2H}`.
#[inline]
pub(crate) fn fbm_factor(h: f64, t: f64, s: f64) -> f64 {
    let p = 2.0 * h;
    t.powf(p) + s.powf(p) - (t - s).abs().powf(p)
}

pub(crate) fn check_quarter_plane(t: [f64; 2]) -> Result<()> {
    if t.iter().all(|x| *x >= 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(domain(format!(
            "point ({}, {}) is outside the closed quarter-plane",
            t[0], t[1]
        )))
    }
}
