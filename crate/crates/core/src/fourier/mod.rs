//! Fourier representations of circular densities, smoothness classes and
//! noise models.

mod density;
mod noise;
mod smoothness;

pub use density::{FourierDensity, Membership, DIAGNOSTIC_GRID};
pub use noise::{NoiseKind, NoiseModel};
pub use smoothness::{SmoothnessClass, SmoothnessKind};

use crate::error::Result;

/// `2 Σ_{j=1}^k |g_j|² / |ε_j|²`: the truncated functional computed from
/// the image density `g = f ⊛ ε`. Equals `f.truncated_functional(k)`
/// whenever `g_j = f_j ε_j`.
pub fn truncated_functional_from_image(g: &FourierDensity, eps: &NoiseModel, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(crate::Error::ZeroDimension);
    }
    let mut s = 0.0;
    for j in 1..=k {
        s += g.coeff(j as i64).norm_sqr() / eps.checked_modulus(j)?.powi(2);
    }
    Ok(2.0 * s)
}

/// Riemann zeta `Σ_{j>=1} j^{-t}` for `t > 1`: 1000 explicit terms plus an
/// Euler–Maclaurin tail.
pub(crate) fn zeta(t: f64) -> f64 {
    const TERMS: usize = 1000;
    let n = TERMS as f64;
    let head: f64 = (1..TERMS).map(|j| (j as f64).powf(-t)).sum();
    head + n.powf(1.0 - t) / (t - 1.0) + 0.5 * n.powf(-t) + t * n.powf(-t - 1.0) / 12.0
        - t * (t + 1.0) * (t + 2.0) * n.powf(-t - 3.0) / 720.0
}
