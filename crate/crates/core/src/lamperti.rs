//! Lamperti lift of stationary kernels to self-similar field covariances.
//!
//! With `X(t) = t1^H1 t2^H2 Y(ln t1, ln t2)` and `R` the covariance of the
//! stationary field `Y`,
//!
//! ```text
//! C(t, s) = (t1 s1)^H1 (t2 s2)^H2 R(ln(t1/s1), ln(t2/s2)),
//! ```
//!
//! and `C` vanishes on the coordinate axes. The `check_*` functions assemble
//! the covariance identities of fields with stationary rectangular
//! increments from [`field_cov`] and return absolute residuals; thresholds
//! are applied by callers.
//!
//! Note on increment stationarity: when `R` satisfies the folded-sum
//! identity `R(v) + R(v1, -v2) = F_{H1}(v1) F_{H2}(v2) / 2`, the variance of
//! every rectangular increment depends only on the side lengths. For
//! `R_theta` with `theta != 0` the covariance between two *different*
//! rectangles is not invariant under a joint shift: the `theta` part of the
//! field covariance factorises into antisymmetric one-dimensional pieces
//! whose second differences depend on position.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernels::{
    check_quarter_plane, f_h_unchecked, fbm_factor, HurstPair, StationaryCovariance,
};

/// Covariance of the self-similar field obtained from a stationary kernel.
#[derive(Debug, Clone)]
pub struct FieldCovariance<K> {
    kernel: K,
    hurst: HurstPair,
}

impl<K: StationaryCovariance> FieldCovariance<K> {
    pub fn new(kernel: K) -> Self {
        let hurst = kernel.hurst();
        Self { kernel, hurst }
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn hurst(&self) -> HurstPair {
        self.hurst
    }

    /// [`field_cov`] without the quarter-plane check.
    #[inline]
    pub(crate) fn eval(&self, t: [f64; 2], s: [f64; 2]) -> f64 {
        if t[0] == 0.0 || t[1] == 0.0 || s[0] == 0.0 || s[1] == 0.0 {
            return 0.0;
        }
        let (h1, h2) = (self.hurst.h1(), self.hurst.h2());
        let pre = (t[0] * s[0]).powf(h1) * (t[1] * s[1]).powf(h2);
        pre * self.kernel.eval([(t[0] / s[0]).ln(), (t[1] / s[1]).ln()])
    }
}

/// Rectangle `[u1, v1] x [u2, v2]` in the quarter-plane with `v > u`
/// coordinatewise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectIncrement {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl RectIncrement {
    pub fn new(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        check_quarter_plane(lower)?;
        check_quarter_plane(upper)?;
        if !(upper[0] > lower[0] && upper[1] > lower[1]) {
            return Err(domain(format!(
                "rectangle upper corner ({}, {}) must exceed lower corner ({}, {})",
                upper[0], upper[1], lower[0], lower[1]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn sides(&self) -> [f64; 2] {
        [self.upper[0] - self.lower[0], self.upper[1] - self.lower[1]]
    }

    /// The same rectangle moved by `shift`.
    pub fn translated(&self, shift: [f64; 2]) -> Result<Self> {
        Self::new(
            [self.lower[0] + shift[0], self.lower[1] + shift[1]],
            [self.upper[0] + shift[0], self.upper[1] + shift[1]],
        )
    }

    /// Corners with their signs in `X(v1,v2) - X(u1,v2) - X(v1,u2) + X(u1,u2)`.
    pub fn signed_corners(&self) -> [([f64; 2], f64); 4] {
        let (u, v) = (self.lower, self.upper);
        [
            ([v[0], v[1]], 1.0),
            ([u[0], v[1]], -1.0),
            ([v[0], u[1]], -1.0),
            ([u[0], u[1]], 1.0),
        ]
    }
}

/// `C(t, s)`, exactly zero when a coordinate of `t` or `s` is zero.
pub fn field_cov<K: StationaryCovariance>(
    fc: &FieldCovariance<K>,
    t: [f64; 2],
    s: [f64; 2],
) -> Result<f64> {
    check_quarter_plane(t)?;
    check_quarter_plane(s)?;
    Ok(fc.eval(t, s))
}

/// `E[Δ_a X Δ_b X]` by bilinear expansion over the 4 x 4 corner pairs.
pub fn increment_covariance<K: StationaryCovariance>(
    fc: &FieldCovariance<K>,
    a: &RectIncrement,
    b: &RectIncrement,
) -> f64 {
    let mut acc = 0.0;
    for (p, sp) in a.signed_corners() {
        for (q, sq) in b.signed_corners() {
            acc += sp * sq * fc.eval(p, q);
        }
    }
    acc
}

fn check_open(t: [f64; 2]) -> Result<()> {
    if t.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(domain(format!(
            "point ({}, {}) is outside the open quarter-plane",
            t[0], t[1]
        )))
    }
}

/// Residuals of
/// `E[X(t) - X(s1,t2)]^2 = |t1-s1|^{2H1} t2^{2H2}` and
/// `E[X(s1,t2) - X(s)]^2 = |t2-s2|^{2H2} s1^{2H1}`.
pub fn check_lemma1<K: StationaryCovariance>(
    fc: &FieldCovariance<K>,
    t: [f64; 2],
    s: [f64; 2],
) -> Result<(f64, f64)> {
    check_open(t)?;
    check_open(s)?;
    let (p1, p2) = (2.0 * fc.hurst.h1(), 2.0 * fc.hurst.h2());
    let mid = [s[0], t[1]];

    let lhs1 = fc.eval(t, t) + fc.eval(mid, mid) - 2.0 * fc.eval(t, mid);
    let rhs1 = (t[0] - s[0]).abs().powf(p1) * t[1].powf(p2);

    let lhs2 = fc.eval(mid, mid) + fc.eval(s, s) - 2.0 * fc.eval(mid, s);
    let rhs2 = (t[1] - s[1]).abs().powf(p2) * s[0].powf(p1);

    Ok(((lhs1 - rhs1).abs(), (lhs2 - rhs2).abs()))
}

/// Residuals of
/// `E[X(t) X(s1,t2)] = t2^{2H2} (t1^{2H1} + s1^{2H1} - |t1-s1|^{2H1}) / 2` and
/// `E[X(s1,t2) X(s)] = s1^{2H1} (t2^{2H2} + s2^{2H2} - |t2-s2|^{2H2}) / 2`.
pub fn check_lemma2<K: StationaryCovariance>(
    fc: &FieldCovariance<K>,
    t: [f64; 2],
    s: [f64; 2],
) -> Result<(f64, f64)> {
    check_open(t)?;
    check_open(s)?;
    let (h1, h2) = (fc.hurst.h1(), fc.hurst.h2());
    let mid = [s[0], t[1]];

    let rhs1 = 0.5 * t[1].powf(2.0 * h2) * fbm_factor(h1, t[0], s[0]);
    let rhs2 = 0.5 * s[0].powf(2.0 * h1) * fbm_factor(h2, t[1], s[1]);

    Ok((
        (fc.eval(t, mid) - rhs1).abs(),
        (fc.eval(mid, s) - rhs2).abs(),
    ))
}

/// Residual of
/// `E[X(t) X(s)] + E[X(t1,s2) X(s1,t2)] = prod_i (t_i^{2H_i} + s_i^{2H_i} - |t_i-s_i|^{2H_i}) / 2`.
pub fn check_lemma3<K: StationaryCovariance>(
    fc: &FieldCovariance<K>,
    t: [f64; 2],
    s: [f64; 2],
) -> Result<f64> {
    check_open(t)?;
    check_open(s)?;
    let (h1, h2) = (fc.hurst.h1(), fc.hurst.h2());
    let lhs = fc.eval(t, s) + fc.eval([t[0], s[1]], [s[0], t[1]]);
    let rhs = 0.5 * fbm_factor(h1, t[0], s[0]) * fbm_factor(h2, t[1], s[1]);
    Ok((lhs - rhs).abs())
}

/// Residual of the folded-sum identity `R(v) + R(v1, -v2) = F_{H1}(v1) F_{H2}(v2) / 2`.
pub fn check_r1<K: StationaryCovariance>(kernel: &K, v: [f64; 2]) -> f64 {
    let h = kernel.hurst();
    let lhs = kernel.eval(v) + kernel.eval([v[0], -v[1]]);
    let rhs = 0.5 * f_h_unchecked(h.h1(), v[0]) * f_h_unchecked(h.h2(), v[1]);
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{fbs_covariance, DetunedKernel, StationaryKernel};
    use proptest::prelude::*;

    fn hp(a: f64, b: f64) -> HurstPair {
        HurstPair::new(a, b).unwrap()
    }

    fn rect(u: [f64; 2], v: [f64; 2]) -> RectIncrement {
        RectIncrement::new(u, v).unwrap()
    }

    /// `R0 + c`: breaks the folded sum by `2c`.
    struct Shifted(StationaryKernel, f64);

    impl StationaryCovariance for Shifted {
        fn hurst(&self) -> HurstPair {
            self.0.hurst
        }
        fn eval(&self, v: [f64; 2]) -> f64 {
            self.0.eval(v) + self.1
        }
        fn describe(&self) -> String {
            "shifted".into()
        }
    }

    #[test]
    fn field_cov_basics() {
        let fc = FieldCovariance::new(StationaryKernel::new(hp(0.3, 0.7), 0.002).unwrap());
        assert!((field_cov(&fc, [1.0, 1.0], [1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(field_cov(&fc, [2.0, 0.0], [1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(field_cov(&fc, [2.0, 1.0], [0.0, 3.0]).unwrap(), 0.0);
        assert!(field_cov(&fc, [2.0, -1.0], [1.0, 3.0]).is_err());
    }

    #[test]
    fn rect_requires_strict_order() {
        assert!(RectIncrement::new([1.0, 1.0], [1.0, 2.0]).is_err());
        assert!(RectIncrement::new([-1.0, 1.0], [2.0, 2.0]).is_err());
        assert!(RectIncrement::new([1.0, 1.0], [2.0, 2.0]).is_ok());
    }

    #[test]
    fn increment_from_origin_is_point_variance() {
        let h = hp(0.35, 0.6);
        let fc = FieldCovariance::new(StationaryKernel::new(h, 0.001).unwrap());
        let a = rect([0.0, 0.0], [1.7, 2.3]);
        let want = 1.7f64.powf(0.7) * 2.3f64.powf(1.2);
        assert!((increment_covariance(&fc, &a, &a) - want).abs() < 1e-13);
    }

    #[test]
    fn lemma_residuals_vanish_at_t_equals_s() {
        let fc = FieldCovariance::new(StationaryKernel::new(hp(0.3, 0.8), 0.002).unwrap());
        let t = [1.3, 2.2];
        let (a, b) = check_lemma1(&fc, t, t).unwrap();
        assert!(a < 1e-14 && b < 1e-14);
        let (a, b) = check_lemma2(&fc, t, t).unwrap();
        assert!(a < 1e-14 && b < 1e-14);
        assert!(check_lemma3(&fc, t, t).unwrap() < 1e-14);
        assert!(check_lemma1(&fc, [0.0, 1.0], t).is_err());
    }

    #[test]
    fn lemma1_for_theta_field() {
        let fc = FieldCovariance::new(StationaryKernel::new(hp(0.5, 0.5), 0.005).unwrap());
        let (a, b) = check_lemma1(&fc, [2.0, 1.0], [1.0, 1.0]).unwrap();
        assert!(a < 1e-12 && b < 1e-12);
    }

    #[test]
    fn r1_residuals() {
        let h = hp(0.42, 0.61);
        let k0 = StationaryKernel::r0(h);
        for v in [[0.0, 0.0], [1.0, -2.0], [5.5, 0.3]] {
            assert!(check_r1(&k0, v) < 1e-15);
        }
        let broken = Shifted(k0, 0.1);
        assert!((check_r1(&broken, [0.0, 0.0]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn theta_field_is_not_fbs() {
        let h = hp(0.5, 0.5);
        let fc = FieldCovariance::new(StationaryKernel::new(h, 0.004).unwrap());
        let e = std::f64::consts::E;
        let (t, s) = ([e, 1.0], [1.0, e]);
        let gap = fc.eval(t, s) - fbs_covariance(&h, t, s).unwrap();
        // e * (R_theta - R0)(1, -1) = -theta e^{-1} sinh^2(1/2)
        let want = -0.004 * (-1.0f64).exp() * 0.5f64.sinh().powi(2);
        assert!((gap - want).abs() < 1e-15);
    }

    #[test]
    fn cross_covariance_of_theta_field_depends_on_position() {
        let h = hp(0.5, 0.5);
        let fc = FieldCovariance::new(StationaryKernel::new(h, 0.0048).unwrap());
        let a = rect([1.0, 1.0], [2.0, 2.0]);
        let b = rect([1.0, 1.0], [4.0, 4.0]);
        let c0 = increment_covariance(&fc, &a, &b);
        let c1 = increment_covariance(
            &fc,
            &a.translated([1.0, 1.0]).unwrap(),
            &b.translated([1.0, 1.0]).unwrap(),
        );
        assert!((c0 - 1.000_675).abs() < 1e-12);
        assert!((c1 - (1.0 + 0.0048 / 4.0 * (4.0f64 / 9.0))).abs() < 1e-12);
        assert!((c0 - c1).abs() > 1e-4);

        // the fractional Brownian sheet has no such dependence
        let fc0 = FieldCovariance::new(StationaryKernel::r0(h));
        let d0 = increment_covariance(&fc0, &a, &b);
        let d1 = increment_covariance(
            &fc0,
            &a.translated([1.0, 1.0]).unwrap(),
            &b.translated([1.0, 1.0]).unwrap(),
        );
        assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn detuned_kernel_breaks_variance_law() {
        let nominal = hp(0.5, 0.5);
        let fc = FieldCovariance::new(DetunedKernel {
            nominal,
            actual: hp(0.3, 0.5),
        });
        let a = rect([1.0, 1.0], [2.0, 2.0]);
        assert!((increment_covariance(&fc, &a, &a) - 1.0).abs() > 0.05);
    }

    fn hurst() -> impl Strategy<Value = f64> {
        0.05f64..0.95
    }

    fn point() -> impl Strategy<Value = [f64; 2]> {
        [0.2f64..5.0, 0.2f64..5.0]
    }

    fn rect_strategy() -> impl Strategy<Value = RectIncrement> {
        (point(), [0.05f64..3.0, 0.05f64..3.0])
            .prop_map(|(u, d)| RectIncrement::new(u, [u[0] + d[0], u[1] + d[1]]).unwrap())
    }

    fn corner_mass<K: StationaryCovariance>(fc: &FieldCovariance<K>, r: &RectIncrement) -> f64 {
        let c = r.signed_corners();
        c.iter()
            .flat_map(|(p, _)| c.iter().map(|(q, _)| fc.eval(*p, *q).abs()))
            .sum()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    proptest! {
        #[test]
        fn r0_lift_is_fbs(h1 in hurst(), h2 in hurst(), t in point(), s in point()) {
            let h = hp(h1, h2);
            let fc = FieldCovariance::new(StationaryKernel::r0(h));
            let c = field_cov(&fc, t, s).unwrap();
            let f = fbs_covariance(&h, t, s).unwrap();
            prop_assert!((c - f).abs() <= 1e-12 * f.abs().max(1.0));
        }

        #[test]
        fn lamperti_round_trip(h1 in hurst(), h2 in hurst(), theta in -0.05f64..0.05,
                               t in point(), s in point()) {
            let k = StationaryKernel::new(hp(h1, h2), theta).unwrap();
            let fc = FieldCovariance::new(k);
            let c = field_cov(&fc, t, s).unwrap();
            let back = c / ((t[0] * s[0]).powf(h1) * (t[1] * s[1]).powf(h2));
            let direct = k.eval([(t[0] / s[0]).ln(), (t[1] / s[1]).ln()]);
            prop_assert!(rel(back, direct) < 1e-13);
        }

        #[test]
        fn covariance_is_self_similar(h1 in hurst(), h2 in hurst(), theta in -0.05f64..0.05,
                                      t in point(), s in point(), a in [0.1f64..10.0, 0.1f64..10.0]) {
            let fc = FieldCovariance::new(StationaryKernel::new(hp(h1, h2), theta).unwrap());
            let lhs = field_cov(&fc, [a[0] * t[0], a[1] * t[1]], [a[0] * s[0], a[1] * s[1]]).unwrap();
            let rhs = a[0].powf(2.0 * h1) * a[1].powf(2.0 * h2) * field_cov(&fc, t, s).unwrap();
            prop_assert!(rel(lhs, rhs) < 1e-12);
        }

        #[test]
        fn lemma_identities_hold(h1 in hurst(), h2 in hurst(), theta in -0.003f64..0.003,
                                 t in point(), s in point()) {
            // |theta| here stays below half of the smallest admissible bound on this range
            let fc = FieldCovariance::new(StationaryKernel::new(hp(h1, h2), theta).unwrap());
            let (a, b) = check_lemma1(&fc, t, s).unwrap();
            prop_assert!(a < 1e-12 && b < 1e-12, "lemma1 {} {}", a, b);
            let (a, b) = check_lemma2(&fc, t, s).unwrap();
            prop_assert!(a < 1e-12 && b < 1e-12, "lemma2 {} {}", a, b);
            prop_assert!(check_lemma3(&fc, t, s).unwrap() < 1e-12);
        }

        #[test]
        fn increment_variance_law(h1 in hurst(), h2 in hurst(), theta in -1.0f64..1.0, r in rect_strategy()) {
            let fc = FieldCovariance::new(StationaryKernel::new(hp(h1, h2), theta).unwrap());
            let d = r.sides();
            let want = d[0].powf(2.0 * h1) * d[1].powf(2.0 * h2);
            let got = increment_covariance(&fc, &r, &r);
            prop_assert!(rel(got, want) < 1e-11, "{} vs {}", got, want);
        }

        #[test]
        fn increment_covariance_symmetric(h1 in hurst(), h2 in hurst(), theta in -1.0f64..1.0,
                                          a in rect_strategy(), b in rect_strategy()) {
            let fc = FieldCovariance::new(StationaryKernel::new(hp(h1, h2), theta).unwrap());
            let ab = increment_covariance(&fc, &a, &b);
            let ba = increment_covariance(&fc, &b, &a);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        }

        #[test]
        fn increment_variance_shift_invariant(h1 in hurst(), h2 in hurst(), theta in -1.0f64..1.0,
                                              r in rect_strategy(), sh in [0.0f64..4.0, 0.0f64..4.0]) {
            let fc = FieldCovariance::new(StationaryKernel::new(hp(h1, h2), theta).unwrap());
            let moved = r.translated(sh).unwrap();
            let v0 = increment_covariance(&fc, &r, &r);
            let v1 = increment_covariance(&fc, &moved, &moved);
            // the corner sum cancels; scale by the size of its terms
            let scale = corner_mass(&fc, &r) + corner_mass(&fc, &moved);
            prop_assert!((v0 - v1).abs() < 1e-13 * scale, "{v0} vs {v1}");
        }

        #[test]
        fn fbs_increment_cross_covariance_shift_invariant(h1 in hurst(), h2 in hurst(),
                a in rect_strategy(), b in rect_strategy(), sh in [0.0f64..4.0, 0.0f64..4.0]) {
            let fc = FieldCovariance::new(StationaryKernel::r0(hp(h1, h2)));
            let c0 = increment_covariance(&fc, &a, &b);
            let c1 = increment_covariance(&fc, &a.translated(sh).unwrap(), &b.translated(sh).unwrap());
            let scale = (increment_covariance(&fc, &a, &a) * increment_covariance(&fc, &b, &b)).sqrt();
            prop_assert!((c0 - c1).abs() <= 1e-11 * scale.max(c0.abs()));
        }
    }
}
