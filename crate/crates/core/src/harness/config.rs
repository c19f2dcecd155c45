use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fourier::{FourierDensity, NoiseModel, SmoothnessClass};
use crate::testing::{calibrate, calibrate_custom, TestCalibration};

/// Smoothness class description, in JSON or as `ordinary:s[:R[:scale]]`,
/// `super:s[:R[:scale]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothnessSpec {
    Ordinary {
        s: f64,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Super {
        s: f64,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Explicit {
        values: Vec<f64>,
        #[serde(default = "one")]
        radius: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl SmoothnessSpec {
    pub fn build(&self) -> Result<SmoothnessClass> {
        match self {
            SmoothnessSpec::Ordinary { s, radius, scale } => SmoothnessClass::ordinary(*s, *radius)?.with_scale(*scale),
            SmoothnessSpec::Super { s, radius, scale } => SmoothnessClass::super_smooth(*s, *radius)?.with_scale(*scale),
            SmoothnessSpec::Explicit { values, radius } => SmoothnessClass::explicit(values.clone(), *radius),
        }
    }
}

fn parse_fields(s: &str, what: &str, max: usize) -> Result<(String, Vec<f64>)> {
    let mut parts = s.split(':');
    let kind = parts.next().unwrap_or_default().trim().to_ascii_lowercase();
    let nums = parts
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number '{p}' in {what} spec '{s}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if nums.len() > max {
        return Err(Error::InvalidParameter(format!("too many fields in {what} spec '{s}'")));
    }
    Ok((kind, nums))
}

impl FromStr for SmoothnessSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, nums) = parse_fields(s, "smoothness", 3)?;
        let get = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
        if nums.is_empty() {
            return Err(Error::InvalidParameter(format!("smoothness spec '{s}' needs an exponent")));
        }
        match kind.as_str() {
            "ordinary" => Ok(SmoothnessSpec::Ordinary { s: nums[0], radius: get(1, 1.0), scale: get(2, 1.0) }),
            "super" => Ok(SmoothnessSpec::Super { s: nums[0], radius: get(1, 1.0), scale: get(2, 1.0) }),
            _ => Err(Error::InvalidParameter(format!("unknown smoothness kind '{kind}'"))),
        }
    }
}

/// Noise description, in JSON or as `direct`, `mild:p[:K[:scale]]`,
/// `severe:p[:K[:scale]]`. Without `K` the model is profile-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Direct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sup_norm: Option<f64>,
    },
    Mild {
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_freq: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sup_norm: Option<f64>,
    },
    Severe {
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_freq: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sup_norm: Option<f64>,
    },
    Density {
        density: FourierDensity,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sup_norm: Option<f64>,
    },
}

impl NoiseSpec {
    pub fn build(&self) -> Result<NoiseModel> {
        let (model, sup) = match self {
            NoiseSpec::Direct { sup_norm } => (NoiseModel::direct(), *sup_norm),
            NoiseSpec::Mild { p, max_freq, scale, sup_norm } => {
                let m = match max_freq {
                    Some(k) => NoiseModel::mild_truncated(*p, *k)?,
                    None => NoiseModel::mild(*p)?,
                };
                (rescale(m, *scale)?, *sup_norm)
            }
            NoiseSpec::Severe { p, max_freq, scale, sup_norm } => {
                let m = match max_freq {
                    Some(k) => NoiseModel::severe_truncated(*p, *k)?,
                    None => NoiseModel::severe(*p)?,
                };
                (rescale(m, *scale)?, *sup_norm)
            }
            NoiseSpec::Density { density, sup_norm } => (NoiseModel::from_density(density.clone())?, *sup_norm),
        };
        match sup {
            Some(c) => model.with_sup_norm(c),
            None => Ok(model),
        }
    }
}

fn rescale(m: NoiseModel, scale: Option<f64>) -> Result<NoiseModel> {
    match scale {
        Some(c) => m.with_scale(c),
        None => Ok(m),
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, nums) = parse_fields(s, "noise", 3)?;
        if kind == "direct" {
            return match nums.as_slice() {
                [] => Ok(NoiseSpec::Direct { sup_norm: None }),
                _ => Err(Error::InvalidParameter("direct noise takes no parameters".into())),
            };
        }
        let p = *nums
            .first()
            .ok_or_else(|| Error::InvalidParameter(format!("noise spec '{s}' needs an exponent")))?;
        let max_freq = match nums.get(1) {
            Some(&k) if k >= 1.0 && k.fract() == 0.0 => Some(k as usize),
            Some(&k) => return Err(Error::InvalidParameter(format!("bad truncation level {k}"))),
            None => None,
        };
        let scale = nums.get(2).copied();
        match kind.as_str() {
            "mild" => Ok(NoiseSpec::Mild { p, max_freq, scale, sup_norm: None }),
            "severe" => Ok(NoiseSpec::Severe { p, max_freq, scale, sup_norm: None }),
            _ => Err(Error::InvalidParameter(format!("unknown noise kind '{kind}'"))),
        }
    }
}

/// Choice of the dimension `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    #[default]
    KappaStar,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSpec {
    /// `C_α = 6‖ε‖_∞/α` with the matching `Ã_α`.
    #[default]
    Remark,
    Custom { c_alpha: f64, a_tilde: f64 },
}

impl CalibrationSpec {
    pub fn build(&self, alpha: f64, eps: &NoiseModel, radius: f64) -> Result<TestCalibration> {
        match self {
            CalibrationSpec::Remark => calibrate(alpha, eps, radius),
            CalibrationSpec::Custom { c_alpha, a_tilde } => calibrate_custom(alpha, eps, radius, *c_alpha, *a_tilde),
        }
    }
}

/// Densities (risk experiments) or alternatives (test experiments).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Null,
    /// Single-frequency densities on the ellipsoid boundary.
    Boundary,
    /// All-plus vertex of the lower-bound hypercube.
    Hypercube,
    /// Both members of the two-point pair.
    TwoPoint,
    /// Uniform mixture over hypercube vertices at separation `A ρ`.
    HypercubeMixture,
    /// Single-frequency alternative at frequency `k` with separation `A ρ`.
    Spike,
}

pub const RISK_SCENARIOS: [Scenario; 4] = [Scenario::Null, Scenario::Boundary, Scenario::Hypercube, Scenario::TwoPoint];
pub const TEST_SCENARIOS: [Scenario; 3] = [Scenario::Null, Scenario::HypercubeMixture, Scenario::Spike];

pub const DEFAULT_RISK_REPLICATIONS: usize = 1_000;
pub const DEFAULT_TEST_REPLICATIONS: usize = 10_000;
pub const DEFAULT_K_MAX: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub smoothness: SmoothnessSpec,
    pub noise: NoiseSpec,
    pub n_grid: Vec<usize>,
    /// Defaults to 1000 for risk and 10000 for test experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub k_rule: KRule,
    #[serde(default)]
    pub seed: u64,
    /// Separation multipliers `A` for test experiments. Empty means
    /// `[A̲_α, Ā_α]` evaluated per `n`.
    #[serde(default)]
    pub a_ladder: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<Scenario>>,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Worker threads; does not affect results and is excluded from the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Output path; excluded from the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

impl ExperimentConfig {
    pub fn new(smoothness: SmoothnessSpec, noise: NoiseSpec, n_grid: Vec<usize>) -> Self {
        ExperimentConfig {
            smoothness,
            noise,
            n_grid,
            replications: None,
            alpha: default_alpha(),
            k_rule: KRule::KappaStar,
            seed: 0,
            a_ladder: Vec::new(),
            scenarios: None,
            calibration: CalibrationSpec::Remark,
            k_max: DEFAULT_K_MAX,
            threads: None,
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::InvalidParameter("n_grid is empty".into()));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 2) {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        if self.replications == Some(0) {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.k_rule == KRule::Fixed(0) {
            return Err(Error::ZeroDimension);
        }
        if self.a_ladder.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("a_ladder entries must be nonnegative".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        self.smoothness.build()?;
        self.noise.build()?;
        Ok(())
    }

    /// SHA-256 of the canonical (key-sorted, compact) JSON form, leaving
    /// out `threads` and `output`.
    pub fn config_hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("threads");
            obj.remove("output");
        }
        let canonical = serde_json::to_string(&v)?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}
