//! Anisotropic self-similar Gaussian fields on the quarter-plane.
//!
//! The crate covers the whole pipeline for fields of the form
//! `X(t) = t1^H1 t2^H2 Y(ln t1, ln t2)` with `Y` stationary:
//!
//! * [`kernels`]: the scalar kernel `F_H`, the product kernel `R0` (the
//!   stationary trace of the fractional Brownian sheet) and the modulated
//!   kernel `R_theta`.
//! * [`lamperti`]: field covariances lifted from stationary kernels and the
//!   covariance identities every field with stationary rectangular
//!   increments must satisfy, as residual checks.
//! * [`spectral`]: cosine/sine transforms of `F_H` by series, quadrature and
//!   gamma-function closed form, the admissible `theta` bound and positive
//!   definiteness certificates.
//! * [`sampler`]: exact Gaussian simulation on finite grids.
//! * [`stats`]: Monte Carlo tests for increment stationarity and for
//!   distinguishing a field from the fractional Brownian sheet.

pub mod error;
pub mod kernels;
pub mod lamperti;
pub mod par;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::{HurstPair, StationaryCovariance, StationaryKernel};
pub use lamperti::{FieldCovariance, RectIncrement};
pub use report::{CheckRecord, VerificationReport};
