use serde::{Deserialize, Serialize};

use super::zeta;
use crate::error::{Error, Result};

/// Shape of the smoothness weights `a_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessKind {
    /// `a_j = j^{-s}`, `s > 1/2`.
    Ordinary { s: f64 },
    /// `a_j = exp(-j^s)`, `s > 0`.
    Super { s: f64 },
    /// Explicit prefix `a_1, ..., a_N`; held at `a_N` beyond.
    Explicit { values: Vec<f64> },
}

/// The ellipsoid `{f : 2 Σ_{j>=1} a_j^{-2} |f_j|² <= R²}` with weights
/// `a_j = scale · base_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClass {
    kind: SmoothnessKind,
    #[serde(default = "one")]
    scale: f64,
    radius: f64,
}

fn one() -> f64 {
    1.0
}

impl SmoothnessClass {
    pub fn ordinary(s: f64, radius: f64) -> Result<Self> {
        if !(s > 0.5 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("ordinary smoothness needs s > 1/2, got {s}")));
        }
        Self::build(SmoothnessKind::Ordinary { s }, 1.0, radius)
    }

    pub fn super_smooth(s: f64, radius: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("super smoothness needs s > 0, got {s}")));
        }
        Self::build(SmoothnessKind::Super { s }, 1.0, radius)
    }

    pub fn explicit(values: Vec<f64>, radius: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("explicit weights are empty".into()));
        }
        if values.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("weights a_j must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("weights a_j must be non-increasing".into()));
        }
        Self::build(SmoothnessKind::Explicit { values }, 1.0, radius)
    }

    fn build(kind: SmoothnessKind, scale: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(SmoothnessClass { kind, scale, radius })
    }

    /// Multiplies every weight by `scale`.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }

    /// Validates a deserialized value.
    pub fn validate(self) -> Result<Self> {
        let base = match self.kind {
            SmoothnessKind::Ordinary { s } => Self::ordinary(s, self.radius)?,
            SmoothnessKind::Super { s } => Self::super_smooth(s, self.radius)?,
            SmoothnessKind::Explicit { values } => Self::explicit(values, self.radius)?,
        };
        base.with_scale(self.scale)
    }

    pub fn kind(&self) -> &SmoothnessKind {
        &self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `a_j` for `j >= 1`.
    pub fn a(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        let j = j.max(1);
        let base = match &self.kind {
            SmoothnessKind::Ordinary { s } => (j as f64).powf(-s),
            SmoothnessKind::Super { s } => (-(j as f64).powf(*s)).exp(),
            SmoothnessKind::Explicit { values } => values[(j - 1).min(values.len() - 1)],
        };
        self.scale * base
    }

    /// `L_a = 2 Σ_{j>=1} a_j²`.
    pub fn l_a(&self) -> Result<f64> {
        let sum = match &self.kind {
            SmoothnessKind::Ordinary { s } => zeta(2.0 * s),
            SmoothnessKind::Super { s } => {
                let mut sum = 0.0;
                for j in 1.. {
                    let term = (-2.0 * (j as f64).powf(*s)).exp();
                    sum += term;
                    if term <= 1e-18 * sum {
                        break;
                    }
                }
                sum
            }
            SmoothnessKind::Explicit { .. } => return Err(Error::ClassNotSummable),
        };
        Ok(2.0 * self.scale * self.scale * sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_constraints() {
        assert!(SmoothnessClass::ordinary(0.5, 1.0).is_err());
        assert!(SmoothnessClass::super_smooth(0.0, 1.0).is_err());
        assert!(SmoothnessClass::ordinary(1.0, 0.0).is_err());
        assert!(SmoothnessClass::explicit(vec![1.0, 2.0], 1.0).is_err());
        assert!(SmoothnessClass::explicit(vec![1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn l_a_ordinary_matches_zeta_two() {
        let c = SmoothnessClass::ordinary(1.0, 1.0).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((c.l_a().unwrap() - 2.0 * pi2_6).abs() < 1e-12);
        let c4 = SmoothnessClass::ordinary(2.0, 1.0).unwrap().with_scale(3.0).unwrap();
        let pi4_90 = std::f64::consts::PI.powi(4) / 90.0;
        assert!((c4.l_a().unwrap() - 18.0 * pi4_90).abs() < 1e-12);
    }

    #[test]
    fn l_a_super_converges() {
        let c = SmoothnessClass::super_smooth(1.0, 1.0).unwrap();
        let exact = 2.0 * (-2.0f64).exp() / (1.0 - (-2.0f64).exp());
        assert!((c.l_a().unwrap() - exact).abs() < 1e-15);
    }

    #[test]
    fn explicit_held_beyond_prefix() {
        let c = SmoothnessClass::explicit(vec![1.0, 0.5], 2.0).unwrap();
        assert_eq!(c.a(7), 0.5);
        assert!(matches!(c.l_a(), Err(Error::ClassNotSummable)));
    }
}
