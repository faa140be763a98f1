//! Spectral side of the positive-definiteness argument.
//!
//! Frequencies use the plain angular convention
//!
//! ```text
//! a(x) = int_0^inf F_H(v) cos(xv) dv
//! b(x) = int_0^inf F_H(v) (1 - e^{-2Hv}) sin(xv) dv
//! ```
//!
//! and the spectral density of `R_theta` factorises as
//! `a1(x) a2(y) - theta/4 b1(x) b2(y)`. It is nonnegative whenever
//! `a_i > sqrt|theta|/2 |b_i|` in both coordinates.
//!
//! `a` is available three ways (series, quadrature, gamma closed form) and
//! `b` two ways. The closed form for `a` uses the denominator
//! `cosh^2(pi x) - cos^2(pi H)`, which is what the trigonometric reduction
//! gives and what collapses to `1/(1/4 + x^2)` at `H = 1/2`.

mod certify;
mod series;
mod transforms;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use certify::{
    coordinate_bound, fourier_inversion_scan, gram_matrix, logspace, theta_bound,
    verify_main_inequality, verify_psd_gram, CertificateMethod, ThetaCertificate,
    DEFAULT_JITTER_TOL, MAX_GRAM_POINTS, SCAN_SERIES_TOL,
};
pub(crate) use series::NeumaierSum;
pub use series::{
    a_series, a_series_value, b_series, b_series_value, binom_coeffs, BinomialSeries, SeriesValue,
    MAX_TERMS,
};
pub use transforms::{
    a_closed_form, a_quadrature, b_quadrature, gamma_modulus_ratio, ln_gamma_modulus_ratio,
    ln_sinhc_pi, low_hurst_margin_floor, lower_a_bound, total_mass_bound, truncation_length,
    upper_b_bound,
};

/// `a(x)` and `b(x)` for one Hurst index and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    pub h: f64,
    pub x: f64,
    pub a: f64,
    pub b: f64,
}

impl SpectralPair {
    /// Both transforms by series, truncated below `tol`.
    pub fn series(h: f64, x: f64, tol: f64) -> Result<Self> {
        Ok(Self {
            h,
            x,
            a: a_series(h, x, tol)?,
            b: b_series(h, x, tol)?,
        })
    }

    /// Both transforms by adaptive quadrature.
    pub fn quadrature(h: f64, x: f64, tol: f64) -> Result<Self> {
        Ok(Self {
            h,
            x,
            a: a_quadrature(h, x, tol)?,
            b: b_quadrature(h, x, tol)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_routes() {
        let s = SpectralPair::series(0.5, 1.0, 1e-12).unwrap();
        let q = SpectralPair::quadrature(0.5, 1.0, 1e-11).unwrap();
        assert!((s.a - 0.8).abs() < 1e-14 && (q.a - 0.8).abs() < 1e-10);
        assert!((s.b - q.b).abs() < 1e-10);
        let z = SpectralPair::series(0.3, 0.0, 1e-12).unwrap();
        assert_eq!(z.b, 0.0);
        assert!(z.a > 0.0);
    }
}
