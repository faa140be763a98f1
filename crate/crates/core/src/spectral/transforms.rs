//! Quadrature and gamma-function routes to the transforms, and the analytic
//! bounds that sandwich them.

use std::f64::consts::{LN_2, PI};

use statrs::function::gamma::ln_gamma as ln_gamma_real;

use crate::error::{domain, Error, Result};
use crate::kernels::{check_hurst, f_h_unchecked};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::ln_abs_gamma_sq;

/// Truncation point for the transform integrals at accuracy `tol`.
pub fn truncation_length(h: f64, tol: f64) -> f64 {
    (1.0 / tol).ln() / h.min(1.0 - h) + 10.0
}

fn quad_transform<G: Fn(f64) -> f64>(h: f64, x: f64, tol: f64, g: G) -> Result<f64> {
    check_hurst(h)?;
    if !x.is_finite() {
        return Err(domain(format!("frequency must be finite, got {x}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(domain(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let len = truncation_length(h, tol);
    let pieces = (len * x.abs().max(1.0) / PI).ceil() as usize;
    let opts = QuadOptions {
        abs_tol: tol,
        ..QuadOptions::default()
    };
    integrate(g, 0.0, len, pieces, opts).map(|q| q.value)
}

/// `a(x)` by adaptive quadrature of `F_H(v) cos(xv)` on `[0, V]`.
pub fn a_quadrature(h: f64, x: f64, tol: f64) -> Result<f64> {
    quad_transform(h, x, tol, |v| f_h_unchecked(h, v) * (x * v).cos())
}

/// `b(x)` by adaptive quadrature of `F_H(v) (1 - e^{-2Hv}) sin(xv)` on `[0, V]`.
pub fn b_quadrature(h: f64, x: f64, tol: f64) -> Result<f64> {
    quad_transform(h, x, tol, |v| {
        f_h_unchecked(h, v) * -(-2.0 * h * v).exp_m1() * (x * v).sin()
    })
}

fn ln_cosh(y: f64) -> f64 {
    let y = y.abs();
    y + (-2.0 * y).exp().ln_1p() - LN_2
}

fn ln_sinh(y: f64) -> f64 {
    y + (-(-2.0 * y).exp_m1()).ln() - LN_2
}

/// `ln(sinh^2 y + s^2)` for `y >= 0`.
fn ln_sinh_sq_plus(y: f64, s: f64) -> f64 {
    if y < 1.0 {
        (y.sinh().powi(2) + s * s).ln()
    } else {
        let ls = ln_sinh(y);
        2.0 * ls + (s * s * (-2.0 * ls).exp()).ln_1p()
    }
}

/// Closed form
/// `a(x) = pi Gamma(1+2H) sin(pi H) cosh(pi x) / ((H^2+x^2) |Gamma(H+ix)|^2 (cosh^2(pi x) - cos^2(pi H)))`,
/// evaluated in log space with `cosh^2(pi x) - cos^2(pi H) = sinh^2(pi x) + sin^2(pi H)`.
pub fn a_closed_form(h: f64, x: f64) -> Result<f64> {
    check_hurst(h)?;
    if !x.is_finite() {
        return Err(domain(format!("frequency must be finite, got {x}")));
    }
    let x = x.abs();
    let s = (PI * h).sin();
    let ln_a = PI.ln() + ln_gamma_real(1.0 + 2.0 * h) + s.ln() + ln_cosh(PI * x)
        - (h * h + x * x).ln()
        - ln_abs_gamma_sq(h, x)?
        - ln_sinh_sq_plus(PI * x, s);
    let a = ln_a.exp();
    if a.is_finite() && a > 0.0 {
        Ok(a)
    } else {
        Err(Error::SpecialFunction(format!(
            "closed form for a(x) not representable at H={h}, x={x}"
        )))
    }
}

/// `ln(Gamma(H)^2 / |Gamma(H+ix)|^2)`.
pub fn ln_gamma_modulus_ratio(h: f64, x: f64) -> Result<f64> {
    check_hurst(h)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * ln_gamma_real(h) - ln_abs_gamma_sq(h, x)?)
}

/// `Gamma(H)^2 / |Gamma(H+ix)|^2 = prod_{n>=0} (1 + x^2/(n+H)^2)`.
pub fn gamma_modulus_ratio(h: f64, x: f64) -> Result<f64> {
    ln_gamma_modulus_ratio(h, x).map(f64::exp)
}

/// `ln(sinh(pi x)/(pi x))`, the lower bound for [`ln_gamma_modulus_ratio`].
pub fn ln_sinhc_pi(x: f64) -> f64 {
    let y = PI * x.abs();
    if y == 0.0 {
        0.0
    } else if y < 1e-4 {
        (y * y / 6.0).ln_1p()
    } else {
        ln_sinh(y) - y.ln()
    }
}

fn gamma_prefactor(h: f64) -> f64 {
    // Gamma(1+2H) sin(pi H) tanh(pi H) / (2 Gamma(H)^2)
    (ln_gamma_real(1.0 + 2.0 * h) - 2.0 * ln_gamma_real(h)).exp() * (PI * h).sin() * (PI * h).tanh()
        / 2.0
}

/// Lower bound for `a(x)`, valid for every `H`:
/// `Gamma(1+2H) sin(pi H) tanh(pi H) / (2 Gamma(H)^2 (H^2+x^2) max(x, H))`.
pub fn lower_a_bound(h: f64, x: f64) -> Result<f64> {
    check_hurst(h)?;
    let x = x.abs();
    Ok(gamma_prefactor(h) / ((h * h + x * x) * x.max(h)))
}

/// Upper bound for `b(x)`, `x >= 0`, on the branch `H > 1/2`:
/// `16H^2/((H^2+x^2) x)` for `x >= H` and `4H/((1-H)(H^2+x^2))` below.
pub fn upper_b_bound(h: f64, x: f64) -> Result<Option<f64>> {
    check_hurst(h)?;
    if h <= 0.5 {
        return Ok(None);
    }
    let x = x.abs();
    let d = h * h + x * x;
    Ok(Some(if x >= h {
        16.0 * h * h / (d * x)
    } else {
        4.0 * h / ((1.0 - h) * d)
    }))
}

/// Floor for `a(x) - (1-H)/2 b(x)` on the branch `H <= 1/2`, given `a(x)`:
/// `H/(H^2+x^2) (2H+1)/3 + (a(x) - H/(H^2+x^2)) / (1+H)`.
pub fn low_hurst_margin_floor(h: f64, x: f64, a: f64) -> Result<Option<f64>> {
    check_hurst(h)?;
    if h > 0.5 {
        return Ok(None);
    }
    let lead = h / (h * h + x * x);
    Ok(Some(lead * (2.0 * h + 1.0) / 3.0 + (a - lead) / (1.0 + h)))
}

/// Paper-style bound on `int_R F_H = 2 a(0)`: `2/H + 2(3-H)/((1-H)(2-H))`.
pub fn total_mass_bound(h: f64) -> Result<f64> {
    check_hurst(h)?;
    Ok(2.0 / h + 2.0 * (3.0 - h) / ((1.0 - h) * (2.0 - h)))
}
