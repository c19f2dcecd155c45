//! Quadratic functional estimation and minimax goodness-of-fit testing for
//! circular data observed with additive noise, `Y = X + ε mod 1`.
//!
//! Densities on the circle `[0, 1)` are carried as truncated Fourier
//! coefficient vectors ([`FourierDensity`]). On top of that sit:
//!
//! - [`sampling`]: inverse-CDF samplers and the wrapped convolution model,
//! - [`estimation`]: the bias-corrected U-statistic estimator of
//!   `q(f) = ||f - 1||²` and its risk bounds,
//! - [`testing`]: the calibrated test of uniformity and radius computations,
//! - [`rates`]: closed-form and finite-n rate calculations,
//! - [`lower_bounds`]: hypercube and two-point hypothesis constructions,
//! - [`harness`]: seeded parallel Monte Carlo experiments and data ingestion.

// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod fourier;
pub mod harness;
pub mod lower_bounds;
pub mod rates;
pub mod sampling;
pub mod testing;

pub use error::{Error, Result};
pub use fourier::{FourierDensity, NoiseKind, NoiseModel, SmoothnessClass, SmoothnessKind};
pub use sampling::{CircularSample, SimRng};
