//! Goodness-of-fit test of uniformity `Δ_{α,k} = 1{q̂_k >= C_α ν_k²}`,
//! its calibration and radius computations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate_from_coeffs, estimate_q, EmpiricalCoeffs};
use crate::fourier::{NoiseModel, SmoothnessClass};
use crate::sampling::CircularSample;

/// `ν_k² = (1/n) sqrt(2 Σ_{j=1}^k |ε_j|^{-4})`.
pub fn nu_k_sq(eps: &NoiseModel, n: usize, k: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if k == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok((2.0 * eps.inv_fourth_sum(k)?).sqrt() / n as f64)
}

/// Threshold and separation constants of the test at level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestCalibration {
    pub alpha: f64,
    pub c_alpha: f64,
    pub a_tilde: f64,
    /// `sqrt(R² + Ã_α²)`.
    pub a_bar: f64,
    pub sup_norm: f64,
    pub radius: f64,
}

/// Left-hand sides of the two calibration requirements,
/// `(2C+1)‖ε‖_∞/C²` and `(2C+1)‖ε‖_∞/(Ã-C)²`, each to be `<= α/2`.
pub fn calibration_margins(c_alpha: f64, a_tilde: f64, sup_norm: f64) -> (f64, f64) {
    let num = (2.0 * c_alpha + 1.0) * sup_norm;
    (num / (c_alpha * c_alpha), num / (a_tilde - c_alpha).powi(2))
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {alpha}")))
    }
}

/// Explicit constants `C_α = 6‖ε‖_∞/α` and
/// `Ã_α = C_α + (2/α) sqrt(12‖ε‖_∞²/α + ‖ε‖_∞)`.
pub fn calibrate(alpha: f64, eps: &NoiseModel, radius: f64) -> Result<TestCalibration> {
    check_level(alpha)?;
    let c = eps.sup_norm();
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::Calibration(format!("sup-norm bound must be finite and >= 1, got {c}")));
    }
    let c_alpha = 6.0 * c / alpha;
    let a_tilde = c_alpha + (2.0 / alpha) * (12.0 * c * c / alpha + c).sqrt();
    calibrate_custom(alpha, eps, radius, c_alpha, a_tilde)
}

/// Any `(C_α, Ã_α)` meeting both calibration requirements.
pub fn calibrate_custom(alpha: f64, eps: &NoiseModel, radius: f64, c_alpha: f64, a_tilde: f64) -> Result<TestCalibration> {
    check_level(alpha)?;
    let c = eps.sup_norm();
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::Calibration(format!("sup-norm bound must be finite and >= 1, got {c}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    if !(c_alpha > 0.0 && a_tilde > c_alpha) {
        return Err(Error::Calibration(format!(
            "need 0 < C_alpha < A_tilde, got C_alpha = {c_alpha}, A_tilde = {a_tilde}"
        )));
    }
    let (m1, m2) = calibration_margins(c_alpha, a_tilde, c);
    let half = alpha / 2.0;
    if m1 > half || m2 > half {
        return Err(Error::Calibration(format!(
            "(2C+1)c/C^2 = {m1}, (2C+1)c/(A-C)^2 = {m2}; both must be <= {half}"
        )));
    }
    Ok(TestCalibration {
        alpha,
        c_alpha,
        a_tilde,
        a_bar: (radius * radius + a_tilde * a_tilde).sqrt(),
        sup_norm: c,
        radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AcceptNull,
    RejectNull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub k: usize,
    pub nu_k_sq: f64,
}

fn decide(statistic: f64, nu2: f64, k: usize, cal: &TestCalibration) -> TestResult {
    let threshold = cal.c_alpha * nu2;
    TestResult {
        statistic,
        threshold,
        decision: if statistic >= threshold {
            Decision::RejectNull
        } else {
            Decision::AcceptNull
        },
        k,
        nu_k_sq: nu2,
    }
}

pub fn run_test(sample: &CircularSample, eps: &NoiseModel, k: usize, cal: &TestCalibration) -> Result<TestResult> {
    let q = estimate_q(sample, eps, k)?;
    Ok(decide(q, nu_k_sq(eps, sample.len(), k)?, k, cal))
}

/// Same as [`run_test`] from precomputed coefficients.
pub fn run_test_coeffs(coeffs: &EmpiricalCoeffs, eps: &NoiseModel, k: usize, cal: &TestCalibration) -> Result<TestResult> {
    let q = estimate_from_coeffs(coeffs, eps, k)?;
    Ok(decide(q, nu_k_sq(eps, coeffs.n(), k)?, k, cal))
}

/// `ρ_k² = a_k² ∨ ν_k²`.
pub fn radius_upper(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, k: usize) -> Result<f64> {
    Ok(cls.a(k).powi(2).max(nu_k_sq(eps, n, k)?))
}

/// `min_k ρ_k²` and its smallest minimiser.
///
/// Past the first `k` with `a_k² <= ν_k²`, `ρ_k² = ν_k²` is
/// non-decreasing, so the scan stops there and the result is exact.
pub fn min_radius(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, k_max: usize) -> Result<(usize, f64)> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let nf = n as f64;
    let mut s = 0.0;
    let mut best = (0, f64::INFINITY);
    for k in 1..=k_max {
        match eps.checked_modulus(k) {
            Ok(m) => s += m.powi(-4),
            Err(_) if best.0 > 0 => return Err(Error::DimensionNotFound { k_max: k - 1 }),
            Err(e) => return Err(e),
        }
        let a2 = cls.a(k).powi(2);
        let nu2 = (2.0 * s).sqrt() / nf;
        let rho = a2.max(nu2);
        if rho < best.1 {
            best = (k, rho);
        }
        if a2 <= nu2 {
            return Ok(best);
        }
    }
    Err(Error::DimensionNotFound { k_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_examples() {
        let d = NoiseModel::direct();
        assert!((nu_k_sq(&d, 10, 8).unwrap() - 4.0 / 10.0).abs() < 1e-15);
        let e = NoiseModel::mild(1.0).unwrap().with_scale(0.5).unwrap();
        assert!((nu_k_sq(&e, 10, 1).unwrap() - 32f64.sqrt() / 10.0).abs() < 1e-15);
        assert!(nu_k_sq(&d, 1, 1).is_err());
        assert!(nu_k_sq(&d, 10, 0).is_err());
    }

    #[test]
    fn remark_constants() {
        let d = NoiseModel::direct();
        let cal = calibrate(0.05, &d, 1.0).unwrap();
        assert!((cal.c_alpha - 120.0).abs() < 1e-12);
        let cal = calibrate(0.5, &d, 2.0).unwrap();
        assert!((cal.c_alpha - 12.0).abs() < 1e-12);
        assert!((cal.a_bar.powi(2) - (4.0 + cal.a_tilde.powi(2))).abs() < 1e-9);
        assert!(calibrate(0.999, &d, 1.0).unwrap().c_alpha >= 6.0);
        assert!(calibrate(1.0, &d, 1.0).is_err());
        assert!(calibrate(0.1, &NoiseModel::mild(1.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn custom_calibration_is_checked() {
        let d = NoiseModel::direct();
        assert!(calibrate_custom(0.05, &d, 1.0, 10.0, 100.0).is_err());
        assert!(calibrate_custom(0.05, &d, 1.0, 200.0, 300.0).is_err());
        assert!(calibrate_custom(0.05, &d, 1.0, 200.0, 500.0).is_ok());
    }

    #[test]
    fn tie_rejects() {
        let cal = calibrate(0.5, &NoiseModel::direct(), 1.0).unwrap();
        let r = decide(1.0, 1.0 / cal.c_alpha, 1, &cal);
        assert_eq!(r.statistic, r.threshold);
        assert_eq!(r.decision, Decision::RejectNull);
    }
}
