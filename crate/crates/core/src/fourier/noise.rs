use num_complex::Complex64;

use super::density::FourierDensity;
use super::zeta;
use crate::error::{Error, Result};

/// Decay profile of the noise coefficients `|ε_j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// No noise: `ε` is a point mass at 0 and `|ε_j| = 1`.
    Direct,
    /// `|ε_j| = c |j|^{-p}`.
    Mild { p: f64 },
    /// `|ε_j| = c exp(-|j|^p)`.
    Severe { p: f64 },
    /// Coefficients read off an explicit density.
    Explicit,
}

/// Noise distribution `ε` together with its ill-posedness profile.
///
/// A model either carries a certified [`FourierDensity`] (and can be
/// simulated) or is profile-only, in which case only `|ε_j|` and the
/// sup-norm bound are available. Truncated profiles have `|ε_j| = 0`
/// beyond their support; asking for such a coefficient where it must be
/// nonzero is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    scale: f64,
    support: Option<usize>,
    density: Option<FourierDensity>,
    sup_norm: f64,
}

impl NoiseModel {
    pub fn direct() -> Self {
        NoiseModel {
            kind: NoiseKind::Direct,
            scale: 1.0,
            support: None,
            density: None,
            sup_norm: 1.0,
        }
    }

    /// Profile-only mildly ill-posed noise, `|ε_j| = |j|^{-p}`.
    pub fn mild(p: f64) -> Result<Self> {
        check_exponent(p, 0.5, "mild")?;
        Self::profile(NoiseKind::Mild { p }, 1.0)
    }

    /// Profile-only severely ill-posed noise, `|ε_j| = exp(-|j|^p)`.
    pub fn severe(p: f64) -> Result<Self> {
        check_exponent(p, 0.0, "severe")?;
        Self::profile(NoiseKind::Severe { p }, 1.0)
    }

    /// Simulatable mildly ill-posed noise supported on `|j| <= max_freq`,
    /// scaled to the largest `c` that keeps the density certified.
    pub fn mild_truncated(p: f64, max_freq: usize) -> Result<Self> {
        check_exponent(p, 0.5, "mild")?;
        Self::truncated(NoiseKind::Mild { p }, max_freq)
    }

    /// Simulatable severely ill-posed noise supported on `|j| <= max_freq`.
    pub fn severe_truncated(p: f64, max_freq: usize) -> Result<Self> {
        check_exponent(p, 0.0, "severe")?;
        Self::truncated(NoiseKind::Severe { p }, max_freq)
    }

    /// Noise given by an explicit density. The sup-norm bound is the ℓ¹
    /// bound `Σ_j |ε_j|`.
    pub fn from_density(density: FourierDensity) -> Result<Self> {
        let sup_norm = 1.0 + density.tail_l1();
        Ok(NoiseModel {
            kind: NoiseKind::Explicit,
            scale: 1.0,
            support: Some(density.max_freq()),
            density: Some(density),
            sup_norm,
        })
    }

    fn profile(kind: NoiseKind, scale: f64) -> Result<Self> {
        let mut model = NoiseModel {
            kind,
            scale,
            support: None,
            density: None,
            sup_norm: f64::INFINITY,
        };
        model.sup_norm = model.l1_bound();
        Ok(model)
    }

    fn truncated(kind: NoiseKind, max_freq: usize) -> Result<Self> {
        if max_freq == 0 {
            return Err(Error::ZeroDimension);
        }
        let model = NoiseModel {
            kind,
            scale: 1.0,
            support: Some(max_freq),
            density: None,
            sup_norm: f64::INFINITY,
        };
        let base_l1: f64 = 2.0 * (1..=max_freq).map(|j| model.base(j)).sum::<f64>();
        model.with_scale(1.0 / base_l1)
    }

    /// Rescales the profile to `|ε_j| = scale · base_j`. Models backed by a
    /// density must stay certified nonnegative.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise scale must be positive, got {scale}")));
        }
        match self.kind {
            NoiseKind::Direct | NoiseKind::Explicit => {
                return Err(Error::InvalidParameter("this noise kind has no scale".into()))
            }
            _ => {}
        }
        if scale * self.base(1) > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "scale {scale} gives |ε_1| > 1, impossible for a density"
            )));
        }
        self.scale = scale;
        if let Some(k) = self.support {
            let tail = (1..=k).map(|j| Complex64::new(self.modulus(j), 0.0)).collect();
            let density = FourierDensity::from_tail(tail)?;
            if !density.is_certified_nonnegative() {
                return Err(Error::NotCertified { l1: density.tail_l1() });
            }
            self.density = Some(density);
        }
        self.sup_norm = self.l1_bound();
        Ok(self)
    }

    /// Overrides the sup-norm bound `‖ε‖_∞` used by the risk bounds and
    /// the test calibration.
    pub fn with_sup_norm(mut self, sup_norm: f64) -> Result<Self> {
        if !(sup_norm >= 1.0) {
            return Err(Error::InvalidParameter(format!("sup-norm bound must be >= 1, got {sup_norm}")));
        }
        self.sup_norm = sup_norm;
        Ok(self)
    }

    fn base(&self, j: usize) -> f64 {
        let j = j as f64;
        match self.kind {
            NoiseKind::Direct => 1.0,
            NoiseKind::Mild { p } => j.powf(-p),
            NoiseKind::Severe { p } => (-j.powf(p)).exp(),
            NoiseKind::Explicit => f64::NAN,
        }
    }

    fn l1_bound(&self) -> f64 {
        match (self.kind, self.support) {
            (NoiseKind::Direct, _) => 1.0,
            (_, Some(k)) => 1.0 + 2.0 * (1..=k).map(|j| self.modulus(j)).sum::<f64>(),
            (NoiseKind::Mild { p }, None) if p > 1.0 => 1.0 + 2.0 * self.scale * zeta(p),
            (NoiseKind::Mild { .. }, None) => f64::INFINITY,
            (NoiseKind::Severe { .. }, None) => {
                let mut sum = 0.0;
                for j in 1.. {
                    let t = self.modulus(j);
                    sum += t;
                    if t <= 1e-18 * sum {
                        break;
                    }
                }
                1.0 + 2.0 * sum
            }
            (NoiseKind::Explicit, None) => unreachable!("explicit noise always has a support"),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Highest frequency with a nonzero coefficient, if finite.
    pub fn support(&self) -> Option<usize> {
        self.support
    }

    pub fn density(&self) -> Option<&FourierDensity> {
        self.density.as_ref()
    }

    /// Upper bound on `‖ε‖_∞`; infinite when no finite bound is known.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_simulatable(&self) -> bool {
        match self.kind {
            NoiseKind::Direct => true,
            _ => self.density.as_ref().is_some_and(|d| d.is_certified_nonnegative()),
        }
    }

    /// `|ε_j|`, zero outside the support.
    pub fn modulus(&self, j: usize) -> f64 {
        if j == 0 {
            return 1.0;
        }
        if self.support.is_some_and(|k| j > k) {
            return 0.0;
        }
        match (&self.kind, &self.density) {
            (NoiseKind::Explicit, Some(d)) => d.coeff(j as i64).norm(),
            _ => self.scale * self.base(j),
        }
    }

    /// `ε_j` as a complex number.
    pub fn coeff(&self, j: i64) -> Complex64 {
        match &self.density {
            Some(d) => d.coeff(j),
            None => Complex64::new(self.modulus(j.unsigned_abs() as usize), 0.0),
        }
    }

    /// `|ε_j|`, failing if it vanishes (or underflows).
    pub fn checked_modulus(&self, j: usize) -> Result<f64> {
        let m = self.modulus(j);
        if m > 0.0 && (m * m) * (m * m) > 0.0 {
            Ok(m)
        } else {
            Err(Error::VanishingNoiseCoefficient { j })
        }
    }

    /// `Σ_{j=1}^k |ε_j|^{-4}`.
    pub fn inv_fourth_sum(&self, k: usize) -> Result<f64> {
        let mut s = 0.0;
        for j in 1..=k {
            s += self.checked_modulus(j)?.powi(-4);
        }
        Ok(s)
    }

    /// Short human-readable label.
    pub fn describe(&self) -> String {
        let body = match self.kind {
            NoiseKind::Direct => return "direct".into(),
            NoiseKind::Mild { p } => format!("mild(p={p}"),
            NoiseKind::Severe { p } => format!("severe(p={p}"),
            NoiseKind::Explicit => return format!("explicit(K={})", self.support.unwrap_or(0)),
        };
        match self.support {
            Some(k) => format!("{body}, K={k}, scale={})", self.scale),
            None => format!("{body}, scale={})", self.scale),
        }
    }
}

fn check_exponent(p: f64, lower: f64, what: &str) -> Result<()> {
    if p > lower && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} ill-posedness needs p > {lower}, got {p}")))
    }
}
