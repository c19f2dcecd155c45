//! Closed-form rate orders, the base term `B`, finite-n rate scans and
//! log-log slope fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::optimal_dim_est;
use crate::fourier::{NoiseModel, SmoothnessClass};
use crate::testing::min_radius;

/// Default frequency window for [`base_term`] when called internally.
pub const DEFAULT_BASE_WINDOW: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseTerm {
    /// `B = max_m min(a_m⁴, a_m²/(n|ε_m|²))`.
    pub value: f64,
    pub m_star: usize,
    /// The maximum may lie beyond `m_max`.
    pub window_saturated: bool,
}

/// Base (elbow) term over `m = 1..=m_max`.
///
/// Once `a_m⁴ <= a_m²/(n|ε_m|²)` at some `m₀`, every later term is at most
/// `a_{m₀}⁴`, so the scan stops there without loss. Frequencies where
/// `|ε_m| = 0` contribute `a_m⁴`.
pub fn base_term(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, m_max: usize) -> Result<BaseTerm> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if m_max == 0 {
        return Err(Error::ZeroDimension);
    }
    let nf = n as f64;
    let mut best = BaseTerm {
        value: f64::NEG_INFINITY,
        m_star: 0,
        window_saturated: true,
    };
    for m in 1..=m_max {
        let a2 = cls.a(m).powi(2);
        let e2 = eps.modulus(m).powi(2);
        let second = if e2 > 0.0 { a2 / (nf * e2) } else { f64::INFINITY };
        let first = a2 * a2;
        let v = first.min(second);
        if v > best.value {
            best.value = v;
            best.m_star = m;
        }
        if first <= second {
            best.window_saturated = false;
            break;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "s")]
pub enum SmoothnessRegime {
    Ordinary(f64),
    Super(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "p")]
pub enum IllPosedness {
    Mild(f64),
    Severe(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub smoothness: SmoothnessRegime,
    pub illposedness: IllPosedness,
}

impl RegimeSpec {
    pub fn new(smoothness: SmoothnessRegime, illposedness: IllPosedness) -> Result<Self> {
        let ok_s = match smoothness {
            SmoothnessRegime::Ordinary(s) => s > 0.5,
            SmoothnessRegime::Super(s) => s > 0.0,
        };
        let ok_p = match illposedness {
            IllPosedness::Mild(p) => p > 0.5,
            IllPosedness::Severe(p) => p > 0.0,
        };
        if !ok_s || !ok_p {
            return Err(Error::InvalidParameter(format!("regime out of range: {smoothness:?}, {illposedness:?}")));
        }
        Ok(RegimeSpec { smoothness, illposedness })
    }
}

/// Order `n^{n_exp} (log n)^{log_exp}`, constants dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub n_exp: f64,
    pub log_exp: f64,
}

impl Order {
    pub fn new(n_exp: f64, log_exp: f64) -> Self {
        Order { n_exp, log_exp }
    }

    pub fn eval(&self, n: f64) -> f64 {
        n.powf(self.n_exp) * n.ln().powf(self.log_exp)
    }

    /// The slower-decaying (asymptotically larger) of the two orders.
    pub fn max(self, other: Order) -> Order {
        let ord = self
            .n_exp
            .partial_cmp(&other.n_exp)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(self.log_exp.partial_cmp(&other.log_exp).unwrap_or(std::cmp::Ordering::Equal));
        if ord.is_ge() {
            self
        } else {
            other
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.n_exp == 0.0, self.log_exp == 0.0) {
            (true, true) => write!(f, "1"),
            (false, true) => write!(f, "n^{}", self.n_exp),
            (true, false) => write!(f, "(log n)^{}", self.log_exp),
            (false, false) => write!(f, "n^{} (log n)^{}", self.n_exp, self.log_exp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_star4: Order,
    pub base_term: Order,
    pub estimation_rate: Order,
    pub testing_radius: Order,
    /// Whether the base term governs the estimation rate.
    pub elbow: bool,
    pub condition: String,
}

fn rate_report(reg: &RegimeSpec) -> Result<RateReport> {
    use IllPosedness::*;
    use SmoothnessRegime::*;
    let (r_star4, base, testing, elbow, condition) = match (reg.smoothness, reg.illposedness) {
        (Ordinary(s), Mild(p)) => {
            let d = 4.0 * s + 4.0 * p + 1.0;
            let base = if s < p {
                Order::new(-2.0 * s / (s + p), 0.0)
            } else {
                Order::new(-1.0, 0.0)
            };
            (
                Order::new(-8.0 * s / d, 0.0),
                base,
                Order::new(-4.0 * s / d, 0.0),
                s - p >= 0.25,
                format!("s - p = {} {} 1/4", s - p, if s - p >= 0.25 { ">=" } else { "<" }),
            )
        }
        (Ordinary(s), Severe(p)) => (
            Order::new(0.0, -4.0 * s / p),
            Order::new(0.0, -4.0 * s / p),
            Order::new(0.0, -2.0 * s / p),
            false,
            "base term and r*^4 share the order (log n)^(-4s/p)".to_string(),
        ),
        (Super(s), Mild(p)) => (
            Order::new(-2.0, (4.0 * p + 1.0) / s),
            Order::new(-1.0, 0.0),
            Order::new(-1.0, (4.0 * p + 1.0) / (2.0 * s)),
            true,
            "base term n^-1 always dominates r*^4".to_string(),
        ),
        (Super(_), Severe(_)) => {
            return Err(Error::RegimeNotTabulated(
                "super smooth with severely ill-posed noise; use numeric_rate_scan".into(),
            ))
        }
    };
    let estimation_rate = if elbow { base } else { r_star4.max(base) };
    Ok(RateReport {
        r_star4,
        base_term: base,
        estimation_rate,
        testing_radius: testing,
        elbow,
        condition,
    })
}

/// Order of the minimax estimation risk, `r*⁴ ∨ B`.
pub fn theoretical_estimation_rate(reg: &RegimeSpec) -> Result<RateReport> {
    rate_report(reg)
}

/// Order of the minimax radius of testing `ρ*²`. Never reports an elbow.
pub fn theoretical_testing_radius(reg: &RegimeSpec) -> Result<RateReport> {
    let mut r = rate_report(reg)?;
    r.elbow = false;
    r.condition = "no elbow for testing".into();
    Ok(r)
}

/// Finite-n quantities at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    /// `ρ*² = min_k ρ_k²`.
    pub rho_sq_min: f64,
    pub k_rho: usize,
    pub kappa_star: usize,
    /// `r*⁴ = min_k ρ_k⁴`.
    pub r_star4: f64,
    pub base: f64,
    pub m_star: usize,
}

impl ScanRow {
    /// `r*⁴ ∨ B`.
    pub fn estimation_rate(&self) -> f64 {
        self.r_star4.max(self.base)
    }
}

/// Exact finite-n rate quantities for each `n` in `n_grid`.
pub fn numeric_rate_scan(cls: &SmoothnessClass, eps: &NoiseModel, n_grid: &[usize], k_max: usize) -> Result<Vec<ScanRow>> {
    if n_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("n_grid must be sorted ascending".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let (k_rho, rho) = min_radius(cls, eps, n, k_max)?;
            let kappa = optimal_dim_est(cls, eps, n, k_max)?;
            let b = base_term(cls, eps, n, DEFAULT_BASE_WINDOW)?;
            Ok(ScanRow {
                n,
                rho_sq_min: rho,
                k_rho,
                kappa_star: kappa,
                r_star4: rho * rho,
                base: b.value,
                m_star: b.m_star,
            })
        })
        .collect()
}

/// Regression model for [`fit_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `log v = c + β log n`.
    Power,
    /// `log v = c + β log n + γ log log n`.
    PowerLog,
    /// `log v = c + γ log log n`.
    LogOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `β`; zero for [`RateModel::LogOnly`].
    pub slope: f64,
    /// `γ`; zero for [`RateModel::Power`].
    pub log_exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log v` against `log n` and/or `log log n`.
pub fn fit_rate(ns: &[f64], values: &[f64], model: RateModel) -> Result<RateFit> {
    if ns.len() != values.len() {
        return Err(Error::InvalidParameter("ns and values differ in length".into()));
    }
    if ns.len() < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 points, got {}", ns.len())));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NonPositive);
    }
    let min_n = if model == RateModel::Power { 0.0 } else { 1.0 };
    if ns.iter().any(|&n| !(n > min_n)) {
        return Err(Error::InvalidParameter("sample sizes must exceed 1 for log log n terms".into()));
    }
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let cols: Vec<Vec<f64>> = match model {
        RateModel::Power => vec![ns.iter().map(|n| n.ln()).collect()],
        RateModel::PowerLog => vec![
            ns.iter().map(|n| n.ln()).collect(),
            ns.iter().map(|n| n.ln().ln()).collect(),
        ],
        RateModel::LogOnly => vec![ns.iter().map(|n| n.ln().ln()).collect()],
    };
    let beta = least_squares(&cols, &y)?;
    let fitted: Vec<f64> = (0..y.len())
        .map(|i| beta[0] + cols.iter().zip(&beta[1..]).map(|(c, b)| b * c[i]).sum::<f64>())
        .collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let (slope, log_exponent) = match model {
        RateModel::Power => (beta[1], 0.0),
        RateModel::PowerLog => (beta[1], beta[2]),
        RateModel::LogOnly => (0.0, beta[1]),
    };
    Ok(RateFit {
        slope,
        log_exponent,
        intercept: beta[0],
        r_squared,
    })
}

/// OLS with intercept via centred normal equations (at most 2 regressors).
fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let m = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / m;
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / m).collect();
    let centred: Vec<Vec<f64>> = cols
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| x - mu).collect())
        .collect();
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let coefs = match centred.len() {
        1 => {
            let sxx = dot(&centred[0], &centred[0]);
            if sxx == 0.0 {
                return Err(Error::InvalidParameter("regressor is constant".into()));
            }
            vec![dot(&centred[0], &yc) / sxx]
        }
        2 => {
            let (a, b, c) = (
                dot(&centred[0], &centred[0]),
                dot(&centred[0], &centred[1]),
                dot(&centred[1], &centred[1]),
            );
            let det = a * c - b * b;
            if det.abs() <= 1e-14 * a * c {
                return Err(Error::InvalidParameter("regressors are collinear".into()));
            }
            let (r0, r1) = (dot(&centred[0], &yc), dot(&centred[1], &yc));
            vec![(c * r0 - b * r1) / det, (a * r1 - b * r0) / det]
        }
        _ => unreachable!("at most two regressors"),
    };
    let intercept = ybar - coefs.iter().zip(&means).map(|(b, mu)| b * mu).sum::<f64>();
    let mut out = vec![intercept];
    out.extend(coefs);
    Ok(out)
}
