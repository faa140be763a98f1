//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Maximum number of bisections of any initial piece.
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 0.0,
            max_intervals: 500_000,
            max_depth: 60,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrate `f` over `[a, b]`, starting from `initial_pieces` equal pieces
/// and bisecting the piece with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    initial_pieces: usize,
    opts: QuadOptions,
) -> Result<QuadEstimate> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Quadrature(format!("invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadEstimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let n0 = initial_pieces.max(1);
    let width = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(n0 * 2);
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 {
            b
        } else {
            a + width * (i + 1) as f64
        };
        let (value, error) = kronrod(&f, lo, hi);
        heap.push(Piece {
            a: lo,
            b: hi,
            value,
            error,
            depth: 0,
        });
    }
    let (mut value, mut error) = totals(&heap);
    loop {
        if !value.is_finite() {
            return Err(Error::Quadrature(
                "integrand produced a non-finite value".into(),
            ));
        }
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            // running totals drift; confirm with a fresh sum
            (value, error) = totals(&heap);
            if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
                return Ok(QuadEstimate {
                    value,
                    error,
                    intervals: heap.len(),
                });
            }
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "interval budget {} exhausted with error estimate {error:e}",
                opts.max_intervals
            )));
        }
        let worst = heap.pop().expect("non-empty");
        if worst.depth >= opts.max_depth {
            return Err(Error::Quadrature(format!(
                "refinement depth cap {} reached near [{}, {}]",
                opts.max_depth, worst.a, worst.b
            )));
        }
        value -= worst.value;
        error -= worst.error;
        let mid = 0.5 * (worst.a + worst.b);
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = kronrod(&f, lo, hi);
            value += v;
            error += e;
            heap.push(Piece {
                a: lo,
                b: hi,
                value: v,
                error: e,
                depth: worst.depth + 1,
            });
        }
    }
}

fn totals(heap: &BinaryHeap<Piece>) -> (f64, f64) {
    let mut value = 0.0;
    let mut comp = 0.0;
    let mut error = 0.0;
    for p in heap.iter() {
        let t = value + p.value;
        comp += if value.abs() >= p.value.abs() {
            (value - t) + p.value
        } else {
            (p.value - t) + value
        };
        value = t;
        error += p.error;
    }
    (value + comp, error)
}
