use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::smoothness::SmoothnessClass;
use crate::error::{Error, Result};

/// Slack on the ℓ¹ positivity certificate, absorbing rounding in
/// constructions that sit exactly on the boundary `Σ_{j≠0} |f_j| = 1`.
const CERTIFICATE_SLACK: f64 = 1e-12;

/// Grid size of the pointwise positivity diagnostic.
pub const DIAGNOSTIC_GRID: usize = 4096;

/// A density on the circle `[0, 1)` given by finitely many Fourier
/// coefficients `f_j = ∫ f(x) e^{-2πijx} dx`, `|j| <= K`.
///
/// Only `j >= 0` is stored; `f_{-j} = conj(f_j)` is implied, so every
/// instance is real-valued by construction. `f_0 = 1` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct FourierDensity {
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    max_freq: usize,
    coeffs: Vec<[f64; 2]>,
}

impl From<FourierDensity> for DensityRepr {
    fn from(d: FourierDensity) -> Self {
        DensityRepr {
            max_freq: d.max_freq(),
            coeffs: d.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl TryFrom<DensityRepr> for FourierDensity {
    type Error = Error;

    fn try_from(r: DensityRepr) -> Result<Self> {
        if r.coeffs.len() != r.max_freq + 1 {
            return Err(Error::InvalidDensity(format!(
                "max_freq {} requires {} coefficients, got {}",
                r.max_freq,
                r.max_freq + 1,
                r.coeffs.len()
            )));
        }
        let all: Vec<Complex64> = r.coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect();
        FourierDensity::from_coeffs(all)
    }
}

/// Result of an ellipsoid membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// `2 Σ_{j=1}^K a_j^{-2} |f_j|²`.
    pub lhs: f64,
}

impl FourierDensity {
    /// The uniform density `f∘`, padded with zero coefficients up to `max_freq`.
    pub fn uniform(max_freq: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); max_freq + 1];
        coeffs[0] = Complex64::new(1.0, 0.0);
        FourierDensity { coeffs }
    }

    /// Builds a density from its tail `f_1, ..., f_K`; `f_0 = 1` is implied.
    pub fn from_tail(tail: Vec<Complex64>) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(tail.len() + 1);
        coeffs.push(Complex64::new(1.0, 0.0));
        coeffs.extend(tail);
        Self::from_coeffs(coeffs)
    }

    /// Real-coefficient shorthand for [`FourierDensity::from_tail`].
    pub fn from_real_tail(tail: &[f64]) -> Result<Self> {
        Self::from_tail(tail.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Builds a density from `f_0, ..., f_K`. `f_0` must be exactly 1.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        match coeffs.first() {
            None => return Err(Error::InvalidDensity("no coefficients".into())),
            Some(c) if *c != Complex64::new(1.0, 0.0) => {
                return Err(Error::InvalidDensity(format!("f_0 must equal 1, got {c}")))
            }
            _ => {}
        }
        if let Some(j) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidDensity(format!("coefficient f_{j} is not finite")));
        }
        Ok(FourierDensity { coeffs })
    }

    pub fn max_freq(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `f_j` for any integer `j`; zero beyond the truncation level.
    pub fn coeff(&self, j: i64) -> Complex64 {
        let idx = j.unsigned_abs() as usize;
        match self.coeffs.get(idx) {
            Some(&c) if j >= 0 => c,
            Some(&c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Coefficients `f_0, ..., f_K`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `Σ_{j≠0} |f_j|`, the quantity controlled by the positivity certificate.
    pub fn tail_l1(&self) -> f64 {
        2.0 * self.coeffs[1..].iter().map(|c| c.norm()).fold(0.0, |a, b| a + b)
    }

    /// Whether `Σ_{j≠0} |f_j| <= 1`, which implies `f >= 0` pointwise.
    pub fn is_certified_nonnegative(&self) -> bool {
        self.tail_l1() <= 1.0 + CERTIFICATE_SLACK
    }

    /// Circular convolution: `g_j = f_j ε_j`, truncated at the smaller `K`.
    pub fn convolve(&self, eps: &FourierDensity) -> FourierDensity {
        let coeffs = self.coeffs.iter().zip(&eps.coeffs).map(|(a, b)| a * b).collect();
        FourierDensity { coeffs }
    }

    /// `q(f) = ‖f - 1‖² = 2 Σ_{j>=1} |f_j|²`.
    pub fn quadratic_functional(&self) -> f64 {
        2.0 * self.coeffs[1..].iter().map(|c| c.norm_sqr()).fold(0.0, |a, b| a + b)
    }

    /// `q_k(f) = 2 Σ_{j=1}^k |f_j|²`.
    pub fn truncated_functional(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::ZeroDimension);
        }
        let upto = k.min(self.max_freq());
        Ok(2.0 * self.coeffs[1..=upto].iter().map(|c| c.norm_sqr()).fold(0.0, |a, b| a + b))
    }

    pub fn ellipsoid_membership(&self, cls: &SmoothnessClass) -> Membership {
        let lhs = 2.0
            * self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c.norm_sqr() / cls.a(i + 1).powi(2))
                .sum::<f64>();
        Membership {
            inside: lhs <= cls.radius() * cls.radius(),
            lhs,
        }
    }

    /// Evaluates `Σ_{|j|<=K} f_j e^{2πijx}`, which is real by symmetry.
    pub fn evaluate(&self, x: f64) -> f64 {
        let mut acc = 1.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let (s, co) = (TAU * j as f64 * x).sin_cos();
            acc += 2.0 * (c.re * co - c.im * s);
        }
        acc
    }

    /// Minimum of the density over a uniform grid of `points` points, with
    /// its location. Diagnostic only; positivity is certified via
    /// [`is_certified_nonnegative`](Self::is_certified_nonnegative).
    pub fn grid_minimum(&self, points: usize) -> (f64, f64) {
        (0..points.max(1))
            .map(|i| {
                let x = i as f64 / points as f64;
                (x, self.evaluate(x))
            })
            .fold((0.0, f64::INFINITY), |best, (x, v)| if v < best.1 { (x, v) } else { best })
    }
}
