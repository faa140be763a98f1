//! Binomial-series representations of the transforms.
//!
//! For `v > 0`, `F_H(v) = e^{-Hv} - sum_{n>=1} c_n e^{-(n-H)v}` with
//! `c_n = binom(2H, n) (-1)^n`, so both transforms reduce to sums of
//! rational functions of `x`:
//!
//! ```text
//! a(x) = H/(H^2+x^2) - sum_n c_n (n-H)/((n-H)^2+x^2)
//! b(x) = 8xH^2/((H^2+x^2)(9H^2+x^2)) - sum_n c_n 4nHx/(((n-H)^2+x^2)((n+H)^2+x^2))
//! ```
//!
//! The `a` series converges like `n^{-1-2H}` only, so one Kummer step is
//! applied against `sum_n c_n/(n+1) = 1/(2H+1) - 1`; the remainder decays
//! like `n^{-3-2H}`.
//!
//! Tail bounds use `|c_m| <= K m^{-1-2H}` for `m >= n >= 2` with
//! `K = n^{1+2H} |c_n|`, valid because `n^{1+2H} |c_n|` is non-increasing
//! from `n = 2` on.

use crate::error::{domain, Error, Result};
use crate::kernels::check_hurst;

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 1_000_000;

const CHECK_EVERY: usize = 256;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.comp += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `binom(2H, n)` for `n = 1..=n_max`, with the decay constant of the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialSeries {
    pub h: f64,
    /// `terms[n - 1] = binom(2H, n)`.
    pub terms: Vec<f64>,
    /// `K` with `|binom(2H, m)| <= K m^{-(1+2H)}` for every `m > n_max`.
    pub tail_constant: f64,
}

impl BinomialSeries {
    pub fn n_max(&self) -> usize {
        self.terms.len()
    }

    /// `binom(2H, n)` for `1 <= n <= n_max`.
    pub fn coefficient(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.terms.get(i).copied())
    }

    /// `sum_{n=1}^{n_max} binom(2H, n) (-1)^{n-1}`; tends to 1.
    pub fn alternating_sum(&self) -> f64 {
        let mut s = NeumaierSum::default();
        for (i, b) in self.terms.iter().enumerate() {
            s.add(if i % 2 == 0 { *b } else { -*b });
        }
        s.value()
    }

    /// Bound on `sum_{n > n_max} |binom(2H, n)|`.
    pub fn alternating_tail_bound(&self) -> f64 {
        let n = self.n_max() as f64;
        self.tail_constant * n.powf(-2.0 * self.h) / (2.0 * self.h)
    }
}

/// Coefficients `binom(2H, n) = prod_{k=1..n} (2H - k + 1)/k` by running product.
pub fn binom_coeffs(h: f64, n_max: usize) -> Result<BinomialSeries> {
    check_hurst(h)?;
    if n_max == 0 {
        return Err(domain("n_max must be at least 1"));
    }
    let p = 2.0 * h;
    let mut terms = Vec::with_capacity(n_max);
    let mut c = 1.0;
    for n in 1..=n_max {
        c *= (p - n as f64 + 1.0) / n as f64;
        terms.push(c);
    }
    // the monotone bound needs an index >= 2
    let (n_ref, c_ref) = if n_max >= 2 {
        (n_max, c)
    } else {
        (2, c * (p - 1.0) / 2.0)
    };
    let tail_constant = (n_ref as f64).powf(1.0 + p) * c_ref.abs();
    Ok(BinomialSeries {
        h,
        terms,
        tail_constant,
    })
}

/// A truncated series value with a rigorous bound on the dropped tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

fn check_args(h: f64, x: f64, tol: f64) -> Result<()> {
    check_hurst(h)?;
    if !x.is_finite() {
        return Err(domain(format!("frequency must be finite, got {x}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Shared driver: adds `term(n, c_n)` for `n >= 1` until `tail(n, K) < tol`.
fn sum_series<T, B>(h: f64, tol: f64, start: NeumaierSum, term: T, tail: B) -> Result<SeriesValue>
where
    T: Fn(f64, f64) -> f64,
    B: Fn(f64, f64) -> f64,
{
    let p = 2.0 * h;
    let mut sum = start;
    let mut c = 1.0;
    let mut last_tail = f64::INFINITY;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        c *= (nf - 1.0 - p) / nf;
        sum.add(term(nf, c));
        if n >= 2 && (n <= 16 || n % CHECK_EVERY == 0 || n == MAX_TERMS) {
            let k = nf.powf(1.0 + p) * c.abs();
            last_tail = tail(nf, k);
            if last_tail < tol {
                return Ok(SeriesValue {
                    value: sum.value(),
                    tail_bound: last_tail,
                    terms: n,
                });
            }
        }
    }
    Err(Error::ToleranceNotReached {
        tol,
        cap: MAX_TERMS,
        tail_bound: last_tail,
    })
}

/// `a(x)` with its truncation bound.
pub fn a_series_value(h: f64, x: f64, tol: f64) -> Result<SeriesValue> {
    check_args(h, x, tol)?;
    let x2 = x * x;
    let mut start = NeumaierSum::default();
    start.add(h / (h * h + x2));
    // Kummer comparison sum, sum_n c_n/(n+1)
    start.add(1.0 - 1.0 / (2.0 * h + 1.0));
    let term = |n: f64, c: f64| {
        let d = n - h;
        -c * (d * (1.0 + h) - x2) / ((d * d + x2) * (n + 1.0))
    };
    let p = 2.0 * h;
    let tail = |n: f64, k: f64| {
        k * (3.0 * n.powf(-2.0 - p) / (2.0 + p) + 2.25 * x2 * n.powf(-3.0 - p) / (3.0 + p))
    };
    sum_series(h, tol, start, term, tail)
}

/// `b(x)` with its truncation bound.
pub fn b_series_value(h: f64, x: f64, tol: f64) -> Result<SeriesValue> {
    check_args(h, x, tol)?;
    let x2 = x * x;
    let h2 = h * h;
    let mut start = NeumaierSum::default();
    start.add(8.0 * x * h2 / ((h2 + x2) * (9.0 * h2 + x2)));
    let term = |n: f64, c: f64| {
        let (dm, dp) = (n - h, n + h);
        -c * 4.0 * n * h * x / ((dm * dm + x2) * (dp * dp + x2))
    };
    let p = 2.0 * h;
    let ax = x.abs();
    let tail = |n: f64, k: f64| k * (81.0 / 16.0) * h * ax * n.powf(-3.0 - p) / (3.0 + p);
    sum_series(h, tol, start, term, tail)
}

/// `a(x) = int_0^inf F_H(v) cos(xv) dv` by series, truncation below `tol`.
pub fn a_series(h: f64, x: f64, tol: f64) -> Result<f64> {
    a_series_value(h, x, tol).map(|s| s.value)
}

/// `b(x) = int_0^inf F_H(v) (1 - e^{-2Hv}) sin(xv) dv` by series.
pub fn b_series(h: f64, x: f64, tol: f64) -> Result<f64> {
    b_series_value(h, x, tol).map(|s| s.value)
}
