//! Complex log-gamma.
//!
//! Lanczos approximation (g = 607/128, 15 terms) for `Re z >= 1/2`, upward
//! recurrence for `0 < Re z < 1/2` and reflection for `Re z <= 0`. Real
//! arguments elsewhere in the crate go through `statrs`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 607.0 / 128.0;

const LANCZOS_COEF: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -2.102_644_417_241_049e-4,
    2.174_396_181_152_126_4e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_275e-5,
    -2.619_083_840_158_141e-5,
    3.689_918_265_953_162_5e-6,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Principal-branch-agnostic `ln Γ(z)`; the real part is `ln |Γ(z)|`.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::SpecialFunction(format!(
            "ln_gamma of non-finite {z}"
        )));
    }
    if z.re <= 0.0 && z.im == 0.0 && z.re == z.re.floor() {
        return Err(Error::SpecialFunction(format!("ln_gamma pole at {z}")));
    }
    let out = if z.re >= 0.5 {
        lanczos(z)
    } else if z.re > 0.0 {
        lanczos(z + 1.0) - z.ln()
    } else {
        // Γ(z) Γ(1-z) = π / sin(πz)
        let s = (z * PI).sin();
        Complex64::new(PI.ln(), 0.0) - s.ln() - lanczos(1.0 - z)
    };
    if out.re.is_finite() && out.im.is_finite() {
        Ok(out)
    } else {
        Err(Error::SpecialFunction(format!("ln_gamma overflow at {z}")))
    }
}

fn lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut sum = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += *c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (z + 0.5) * t.ln() - t + LN_SQRT_2PI + sum.ln()
}

/// `ln |Γ(h + ix)|^2` for `h > 0`.
pub fn ln_abs_gamma_sq(h: f64, x: f64) -> Result<f64> {
    Ok(2.0 * ln_gamma(Complex64::new(h, x))?.re)
}
