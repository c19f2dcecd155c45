//! Bias-corrected U-statistic estimator of the quadratic functional
//! `q(f) = ‖f - 1‖²` from noisy circular data, its dimension rule and its
//! risk bounds.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{FourierDensity, NoiseModel, SmoothnessClass};
use crate::rates::{base_term, DEFAULT_BASE_WINDOW};
use crate::sampling::CircularSample;
use crate::testing::nu_k_sq;

/// Empirical Fourier coefficients `ĝ_j = (1/n) Σ_k e^{-2πij Y_k}`,
/// `j = 0..=j_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCoeffs {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl EmpiricalCoeffs {
    pub fn from_values(values: &[f64], j_max: usize) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::SampleTooSmall { n, min: 1 });
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); j_max + 1];
        for &y in values {
            let (s, c) = (TAU * y).sin_cos();
            let z = Complex64::new(c, -s);
            let mut w = Complex64::new(1.0, 0.0);
            for a in acc.iter_mut().skip(1) {
                w *= z;
                *a += w;
            }
        }
        let inv = 1.0 / n as f64;
        for a in &mut acc {
            *a *= inv;
        }
        acc[0] = Complex64::new(1.0, 0.0);
        Ok(EmpiricalCoeffs { n, coeffs: acc })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, j: usize) -> Complex64 {
        self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

pub fn empirical_coeffs(sample: &CircularSample, j_max: usize) -> Result<EmpiricalCoeffs> {
    EmpiricalCoeffs::from_values(sample.values(), j_max)
}

/// `|ĝ_j|² - (1 - |ĝ_j|²)/(n - 1)`, unbiased for `|g_j|²`. Not clamped.
pub fn unbiased_sq_modulus(g_hat: Complex64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let m = g_hat.norm_sqr();
    Ok(m - (1.0 - m) / (n as f64 - 1.0))
}

/// `q̂_k = 2 Σ_{j=1}^k |ε_j|^{-2} {|ĝ_j|² - (1 - |ĝ_j|²)/(n - 1)}`.
pub fn estimate_from_coeffs(coeffs: &EmpiricalCoeffs, eps: &NoiseModel, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroDimension);
    }
    if coeffs.j_max() < k {
        return Err(Error::InvalidParameter(format!(
            "empirical coefficients computed up to {}, need {k}",
            coeffs.j_max()
        )));
    }
    let mut s = 0.0;
    for j in 1..=k {
        s += unbiased_sq_modulus(coeffs.coeff(j), coeffs.n())? / eps.checked_modulus(j)?.powi(2);
    }
    Ok(2.0 * s)
}

pub fn estimate_q_values(values: &[f64], eps: &NoiseModel, k: usize) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::SampleTooSmall { n: values.len(), min: 2 });
    }
    if k == 0 {
        return Err(Error::ZeroDimension);
    }
    estimate_from_coeffs(&EmpiricalCoeffs::from_values(values, k)?, eps, k)
}

pub fn estimate_q(sample: &CircularSample, eps: &NoiseModel, k: usize) -> Result<f64> {
    estimate_q_values(sample.values(), eps, k)
}

/// `max(q̂_k, 0)`. Convenience only; the unbiased statistic is `estimate_q`.
pub fn estimate_q_clamped(sample: &CircularSample, eps: &NoiseModel, k: usize) -> Result<f64> {
    Ok(estimate_q(sample, eps, k)?.max(0.0))
}

/// Symmetric kernel `h(y1, y2) = Σ_{0<|j|<=k} e^{2πij(y2-y1)} / |ε_j|²`;
/// `q̂_k` is its average over ordered pairs of distinct observations.
pub fn ustat_kernel(y1: f64, y2: f64, eps: &NoiseModel, k: usize) -> Result<f64> {
    let mut s = 0.0;
    for j in 1..=k {
        s += (TAU * j as f64 * (y2 - y1)).cos() / eps.checked_modulus(j)?.powi(2);
    }
    Ok(2.0 * s)
}

/// Smallest `k <= k_max` with `a_k⁴ <= (2/n²) Σ_{j=1}^k |ε_j|^{-4}`.
///
/// The scan also stops where `|ε_j|` vanishes, since no larger dimension
/// can be used there.
pub fn optimal_dim_est(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, k_max: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let n2 = (n as f64).powi(2);
    let mut s = 0.0;
    for k in 1..=k_max {
        match eps.checked_modulus(k) {
            Ok(m) => s += m.powi(-4),
            Err(_) => return Err(Error::DimensionNotFound { k_max: k - 1 }),
        }
        if cls.a(k).powi(4) <= 2.0 * s / n2 {
            return Ok(k);
        }
    }
    Err(Error::DimensionNotFound { k_max })
}

/// How the three terms of a [`RiskBoundBreakdown`] combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundForm {
    Sum,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBoundBreakdown {
    pub bias_sq: f64,
    /// Term of order `1/n` (uniform form: `c₃ B`).
    pub variance_linear: f64,
    /// Term of order `1/n²` (uniform form: `c₂ ν_k⁴`).
    pub variance_quadratic: f64,
    pub total: f64,
    /// `(c₁, c₂, c₃)`; zero for the per-density form.
    pub constants: (f64, f64, f64),
    pub form: BoundForm,
}

/// Uniform risk bound over the ellipsoid,
/// `c₁ a_k⁴ ∨ c₂ ν_k⁴ ∨ c₃ B` with `c₁ = 3R⁴`, `c₂ = 3(‖ε‖_∞ + R²)`,
/// `c₃ = 3‖ε‖_∞ R²`.
pub fn risk_upper_bound(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, k: usize) -> Result<RiskBoundBreakdown> {
    let r2 = cls.radius().powi(2);
    let c = eps.sup_norm();
    let (c1, c2, c3) = (3.0 * r2 * r2, 3.0 * (c + r2), 3.0 * c * r2);
    let nu2 = nu_k_sq(eps, n, k)?;
    let b = base_term(cls, eps, n, DEFAULT_BASE_WINDOW)?;
    let bias_sq = c1 * cls.a(k).powi(4);
    let variance_quadratic = c2 * nu2 * nu2;
    let variance_linear = c3 * b.value;
    Ok(RiskBoundBreakdown {
        bias_sq,
        variance_linear,
        variance_quadratic,
        total: bias_sq.max(variance_linear).max(variance_quadratic),
        constants: (c1, c2, c3),
        form: BoundForm::Max,
    })
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if k == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(())
}

/// `(Σ_{|j|>k} |f_j|²)² = (q(f) - q_k(f))²`.
pub fn squared_bias(f: &FourierDensity, k: usize) -> Result<f64> {
    let tail = f.quadratic_functional() - f.truncated_functional(k)?;
    Ok(tail * tail)
}

/// Per-density risk bound with the variance written as
/// `(c/n) Σ_{0<|j|<=k} |f_j|²/|ε_j|² + (c/n²) Σ_{0<|j|<=k} |ε_j|^{-4}`,
/// `c = ‖ε‖_∞`. This variance term understates the true variance (see
/// [`variance_bound`]); it is kept for comparison only.
pub fn risk_bound_printed(f: &FourierDensity, eps: &NoiseModel, n: usize, k: usize) -> Result<RiskBoundBreakdown> {
    check_nk(n, k)?;
    let (lin, quad) = variance_sums(f, eps, k)?;
    let c = eps.sup_norm();
    let nf = n as f64;
    let bias_sq = squared_bias(f, k)?;
    let variance_linear = c * lin / nf;
    let variance_quadratic = c * quad / (nf * nf);
    Ok(RiskBoundBreakdown {
        bias_sq,
        variance_linear,
        variance_quadratic,
        total: bias_sq + variance_linear + variance_quadratic,
        constants: (0.0, 0.0, 0.0),
        form: BoundForm::Sum,
    })
}

/// Valid variance bound
/// `(4c/n) Σ_{0<|j|<=k} |f_j|²/|ε_j|² + (2c/(n(n-1))) Σ_{0<|j|<=k} |ε_j|^{-4}`
/// from `Var(q̂_k) = 2(2(n-2)ξ₁ + ξ₂)/(n(n-1))` with `ξ₁`, `ξ₂` bounded by
/// `c = ‖ε‖_∞ >= ‖g‖_∞` times the corresponding Parseval sums.
pub fn variance_bound(f: &FourierDensity, eps: &NoiseModel, n: usize, k: usize) -> Result<f64> {
    check_nk(n, k)?;
    let (lin, quad) = variance_sums(f, eps, k)?;
    let c = eps.sup_norm();
    let nf = n as f64;
    Ok(4.0 * c * lin / nf + 2.0 * c * quad / (nf * (nf - 1.0)))
}

/// `(Σ_{0<|j|<=k} |f_j|²/|ε_j|², Σ_{0<|j|<=k} |ε_j|^{-4})`.
fn variance_sums(f: &FourierDensity, eps: &NoiseModel, k: usize) -> Result<(f64, f64)> {
    let mut lin = 0.0;
    let mut quad = 0.0;
    for j in 1..=k {
        let w = eps.checked_modulus(j)?.powi(2);
        lin += 2.0 * f.coeff(j as i64).norm_sqr() / w;
        quad += 2.0 / (w * w);
    }
    Ok((lin, quad))
}

/// `(ξ₁, ξ₂) = (Var h₁(Y₁), Var h(Y₁, Y₂))` for the kernel of
/// [`ustat_kernel`] under `Y ~ f ⊛ ε`, computed exactly from Fourier
/// coefficients.
pub fn ustat_components(f: &FourierDensity, eps: &NoiseModel, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::ZeroDimension);
    }
    let kk = k as i64;
    let g = |j: i64| f.coeff(j) * eps.coeff(j);
    let mut w = Vec::with_capacity(2 * k);
    let mut js = Vec::with_capacity(2 * k);
    for j in (-kk..=kk).filter(|&j| j != 0) {
        js.push(j);
        w.push(eps.checked_modulus(j.unsigned_abs() as usize)?.powi(2));
    }
    let qk = f.truncated_functional(k)?;
    let mut e_h1_sq = Complex64::new(0.0, 0.0);
    let mut e_h_sq = 0.0;
    for (a, &j) in js.iter().enumerate() {
        for (b, &l) in js.iter().enumerate() {
            let ww = w[a] * w[b];
            let gjl = g(j - l);
            e_h1_sq += gjl * g(j).conj() * g(l) / ww;
            e_h_sq += gjl.norm_sqr() / ww;
        }
    }
    Ok((e_h1_sq.re - qk * qk, e_h_sq - qk * qk))
}

/// Variance of a U-statistic averaging a symmetric kernel over pairs:
/// `2(2(n-2)ξ₁ + ξ₂)/(n(n-1))`.
pub fn ustat_variance(xi1: f64, xi2: f64, n: usize) -> f64 {
    let nf = n as f64;
    2.0 * (2.0 * (nf - 2.0) * xi1 + xi2) / (nf * (nf - 1.0))
}

/// Exact `Var(q̂_k)` under `f`.
pub fn exact_variance(f: &FourierDensity, eps: &NoiseModel, n: usize, k: usize) -> Result<f64> {
    check_nk(n, k)?;
    let (xi1, xi2) = ustat_components(f, eps, k)?;
    Ok(ustat_variance(xi1, xi2, n))
}

/// Exact `E(q̂_k - q(f))²` under `f`.
pub fn exact_risk(f: &FourierDensity, eps: &NoiseModel, n: usize, k: usize) -> Result<f64> {
    Ok(squared_bias(f, k)? + exact_variance(f, eps, n, k)?)
}
