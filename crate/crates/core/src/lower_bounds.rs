//! Hypotheses behind the lower bounds: the hypercube mixture for testing,
//! the two-point pair for estimation, the χ² and Hellinger computations
//! that control them, and the testing-to-estimation reduction.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::optimal_dim_est;
use crate::fourier::{FourierDensity, NoiseModel, SmoothnessClass, DIAGNOSTIC_GRID};
use crate::sampling::SimRng;
use crate::testing::{min_radius, nu_k_sq};

/// Slack applied to every inequality check.
pub const CONDITION_SLACK: f64 = 1e-10;

/// Largest cube dimension for which vertices are enumerated.
pub const MAX_ENUMERATED_DIM: usize = 20;

/// One verified inequality (or identity) of a construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub label: &'static str,
    pub description: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl ConditionCheck {
    fn le(label: &'static str, description: &'static str, lhs: f64, rhs: f64) -> Self {
        ConditionCheck {
            label,
            description,
            lhs,
            rhs,
            holds: lhs <= rhs + CONDITION_SLACK,
        }
    }

    fn eq(label: &'static str, description: &'static str, lhs: f64, rhs: f64) -> Self {
        ConditionCheck {
            label,
            description,
            lhs,
            rhs,
            holds: (lhs - rhs).abs() <= CONDITION_SLACK * rhs.abs().max(1.0),
        }
    }
}

fn first_failure(construction: &'static str, checks: &[ConditionCheck]) -> Result<()> {
    match checks.iter().find(|c| !c.holds) {
        Some(c) => Err(Error::ConditionViolated {
            construction,
            condition: c.label,
            lhs: c.lhs,
            rhs: c.rhs,
        }),
        None => Ok(()),
    }
}

/// `η = (a_{κ*}² ∧ ν_{κ*}²) / (a_{κ*}² ∨ ν_{κ*}²)` at the optimal dimension.
pub fn find_eta(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, k_max: usize) -> Result<f64> {
    let kappa = optimal_dim_est(cls, eps, n, k_max)?;
    eta_at(cls, eps, n, kappa)
}

fn eta_at(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, kappa: usize) -> Result<f64> {
    let a2 = cls.a(kappa).powi(2);
    let nu2 = nu_k_sq(eps, n, kappa)?;
    Ok((a2.min(nu2) / a2.max(nu2)).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Hypercube of densities `f^τ_j = τ_j θ_j`, `1 <= j <= κ`, mixed
/// uniformly over `τ ∈ {±}^κ`.
#[derive(Debug, Clone, Serialize)]
pub struct HypercubeFamily {
    /// `θ_j`, `j = 1..=κ`.
    pub theta: Vec<f64>,
    pub kappa: usize,
    pub zeta: f64,
    pub eta: f64,
    /// `ρ*² = min_k ρ_k²`.
    pub rho_sq: f64,
    /// Squared separation `q_κ(f^τ)` the family was built for.
    pub separation_sq: f64,
    pub n: usize,
    pub alpha: f64,
    pub conditions: Vec<ConditionCheck>,
}

/// `ζ = R² ∧ sqrt(ln(1 + 2α²)) ∧ 1/L_a`.
pub fn zeta(cls: &SmoothnessClass, alpha: f64) -> Result<f64> {
    let la = cls.l_a()?;
    Ok(cls.radius().powi(2).min((1.0 + 2.0 * alpha * alpha).ln().sqrt()).min(1.0 / la))
}

/// `A̲_α² = η ζ`, the squared lower separation constant.
pub fn lower_separation_constant_sq(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, alpha: f64, k_max: usize) -> Result<f64> {
    Ok(find_eta(cls, eps, n, k_max)? * zeta(cls, alpha)?)
}

/// Hypercube at `κ = κ*` with `θ_j = sqrt(ζη) ρ* |ε_j|^{-2} / sqrt(2 Σ_{l<=κ} |ε_l|^{-4})`.
/// Fails on the first violated condition.
pub fn build_hypercube(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, alpha: f64, k_max: usize) -> Result<HypercubeFamily> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {alpha}")));
    }
    let zeta = zeta(cls, alpha)?;
    let kappa = optimal_dim_est(cls, eps, n, k_max)?;
    let eta = eta_at(cls, eps, n, kappa)?;
    let (_, rho_sq) = min_radius(cls, eps, n, k_max)?;
    let fam = HypercubeFamily::at_separation(cls, eps, n, alpha, kappa, zeta * eta * rho_sq, zeta, eta, rho_sq)?;
    first_failure("hypercube", &fam.conditions)?;
    Ok(fam)
}

impl HypercubeFamily {
    #[allow(clippy::too_many_arguments)]
    fn at_separation(
        cls: &SmoothnessClass,
        eps: &NoiseModel,
        n: usize,
        alpha: f64,
        kappa: usize,
        separation_sq: f64,
        zeta: f64,
        eta: f64,
        rho_sq: f64,
    ) -> Result<Self> {
        let s = 2.0 * eps.inv_fourth_sum(kappa)?;
        let amp = separation_sq.sqrt() / s.sqrt();
        let theta: Vec<f64> = (1..=kappa)
            .map(|j| Ok(amp * eps.checked_modulus(j)?.powi(-2)))
            .collect::<Result<_>>()?;
        let mut fam = HypercubeFamily {
            theta,
            kappa,
            zeta,
            eta,
            rho_sq,
            separation_sq,
            n,
            alpha,
            conditions: Vec::new(),
        };
        fam.conditions = fam.check(cls, eps)?;
        Ok(fam)
    }

    /// Same cube direction rescaled to squared separation `separation_sq`.
    /// Conditions are re-evaluated but not enforced.
    pub fn with_separation(&self, cls: &SmoothnessClass, eps: &NoiseModel, separation_sq: f64) -> Result<Self> {
        Self::at_separation(
            cls,
            eps,
            self.n,
            self.alpha,
            self.kappa,
            separation_sq,
            self.zeta,
            self.eta,
            self.rho_sq,
        )
    }

    /// Conditions (a)-(g); (f) checks `q_κ(f^τ) = separation_sq`, which is
    /// `ζηρ*²` for [`build_hypercube`]. Every vertex has the same coefficient moduli, so
    /// the moduli-dependent checks are evaluated on the all-plus vertex.
    fn check(&self, cls: &SmoothnessClass, eps: &NoiseModel) -> Result<Vec<ConditionCheck>> {
        let v = self.vertex(&vec![true; self.kappa]);
        let mut sym_err: f64 = 0.0;
        for j in 1..=self.kappa as i64 {
            sym_err = sym_err.max((v.coeff(-j) - v.coeff(j).conj()).norm());
        }
        let l2: f64 = v.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * 2.0 - 1.0;
        let sim: f64 = 2.0
            * (self.n as f64).powi(2)
            * self
                .theta
                .iter()
                .enumerate()
                .map(|(i, t)| Ok(t.powi(4) * eps.checked_modulus(i + 1)?.powi(4)))
                .sum::<Result<f64>>()?;
        let r2 = cls.radius().powi(2);
        Ok(vec![
            ConditionCheck::le("a", "square summable", if l2.is_finite() { 0.0 } else { 1.0 }, 0.0),
            ConditionCheck::eq("b", "hermitian symmetry", sym_err, 0.0),
            ConditionCheck::eq("c", "f_0 = 1", v.coeff(0).re, 1.0),
            ConditionCheck::le("d", "positivity: sum |f_j| <= 1", v.tail_l1(), 1.0),
            ConditionCheck::le("e", "smoothness: ellipsoid membership", v.ellipsoid_membership(cls).lhs, r2),
            ConditionCheck::eq("f", "separation: q_kappa equals the target separation", v.truncated_functional(self.kappa)?, self.separation_sq),
            ConditionCheck::le("g", "similarity: n^2 sum |f_j|^4 |eps_j|^4 <= ln(1 + 2 alpha^2)", sim, (1.0 + 2.0 * self.alpha * self.alpha).ln()),
        ])
    }

    pub fn all_conditions_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    /// Vertex for the sign vector `tau` (`true` = `+`).
    pub fn vertex(&self, tau: &[bool]) -> FourierDensity {
        assert_eq!(tau.len(), self.kappa, "sign vector has wrong length");
        let tail = self
            .theta
            .iter()
            .zip(tau)
            .map(|(&t, &plus)| Complex64::new(if plus { t } else { -t }, 0.0))
            .collect();
        FourierDensity::from_tail(tail).expect("finite coefficients")
    }

    /// Vertex whose sign `j` is the bit `j - 1` of `bits`.
    pub fn vertex_from_bits(&self, bits: u64) -> FourierDensity {
        let tau: Vec<bool> = (0..self.kappa).map(|i| bits >> i & 1 == 1).collect();
        self.vertex(&tau)
    }

    /// Uniformly random vertex.
    pub fn random_vertex(&self, rng: &mut SimRng) -> FourierDensity {
        let tau: Vec<bool> = (0..self.kappa).map(|_| rng.uniform() < 0.5).collect();
        self.vertex(&tau)
    }

    /// All `2^κ` vertices; only for `κ <= 20`.
    pub fn vertices(&self) -> Result<Vec<FourierDensity>> {
        if self.kappa > MAX_ENUMERATED_DIM {
            return Err(Error::TooLarge {
                what: "cube dimension",
                value: self.kappa,
                max: MAX_ENUMERATED_DIM,
            });
        }
        Ok((0..1u64 << self.kappa).map(|b| self.vertex_from_bits(b)).collect())
    }

    /// Coefficient moduli `θ_j |ε_j|` of the observation densities.
    pub fn observation_theta(&self, eps: &NoiseModel) -> Vec<f64> {
        self.theta.iter().enumerate().map(|(i, t)| t * eps.modulus(i + 1)).collect()
    }
}

/// `exp(2n² Σ θ_j⁴) - 1`.
pub fn chi2_mixture_bound(theta: &[f64], n: usize) -> Result<f64> {
    let exponent = 2.0 * (n as f64).powi(2) * theta.iter().map(|t| t.powi(4)).sum::<f64>();
    if !exponent.is_finite() || exponent > 700.0 {
        return Err(Error::Overflow { exponent });
    }
    Ok(exponent.exp_m1())
}

fn check_theta(theta: &[f64]) -> Result<()> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("theta must be finite".into()));
    }
    Ok(())
}

/// χ² divergence of the `n`-sample hypercube mixture with coefficient
/// moduli `θ` from the uniform product, by periodic trapezoid quadrature on
/// a `points^n` grid. Exact (up to rounding) once `points > 2κ`.
pub fn chi2_mixture_quadrature(theta: &[f64], n: usize, points: usize) -> Result<f64> {
    check_theta(theta)?;
    let k = theta.len();
    if n == 0 || n > 3 {
        return Err(Error::TooLarge { what: "quadrature sample size", value: n, max: 3 });
    }
    if k > 3 {
        return Err(Error::TooLarge { what: "quadrature cube dimension", value: k, max: 3 });
    }
    if points < 2 * k + 1 {
        return Err(Error::InvalidParameter(format!("need at least {} points", 2 * k + 1)));
    }
    // density of each vertex at each grid point
    let verts = 1usize << k;
    let table: Vec<Vec<f64>> = (0..verts)
        .map(|b| {
            (0..points)
                .map(|i| {
                    let x = i as f64 / points as f64;
                    1.0 + (0..k)
                        .map(|j| {
                            let sign = if b >> j & 1 == 1 { 1.0 } else { -1.0 };
                            2.0 * sign * theta[j] * (TAU * (j + 1) as f64 * x).cos()
                        })
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let total = points.pow(n as u32);
    let mut acc = 0.0;
    let mut idx = vec![0usize; n];
    for flat in 0..total {
        let mut r = flat;
        for slot in idx.iter_mut() {
            *slot = r % points;
            r /= points;
        }
        let lr: f64 = table.iter().map(|t| idx.iter().map(|&i| t[i]).product::<f64>()).sum::<f64>() / verts as f64;
        acc += (lr - 1.0).powi(2);
    }
    Ok(acc / total as f64)
}

/// Numerical χ² of the observation mixture of `family` under `eps` with
/// `n` observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chi2Estimate {
    /// Tensor-quadrature value.
    pub quadrature: f64,
    /// Monte Carlo mean of `(L - 1)²`, `L` the likelihood ratio under the null.
    pub monte_carlo: f64,
    pub std_error: f64,
}

pub fn mc_chi2_estimate(family: &HypercubeFamily, eps: &NoiseModel, n: usize, reps: usize, rng: &mut SimRng) -> Result<Chi2Estimate> {
    if n > 3 || family.kappa > 3 {
        return Err(Error::TooLarge {
            what: "n or cube dimension",
            value: n.max(family.kappa),
            max: 3,
        });
    }
    if reps < 2 {
        return Err(Error::InvalidParameter("need at least 2 replications".into()));
    }
    let theta = family.observation_theta(eps);
    let quadrature = chi2_mixture_quadrature(&theta, n, 4 * family.kappa + 4)?;
    let k = theta.len();
    let verts = 1usize << k;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut z = vec![0.0; n];
    for _ in 0..reps {
        for zi in z.iter_mut() {
            *zi = rng.uniform();
        }
        let lr: f64 = (0..verts)
            .map(|b| {
                z.iter()
                    .map(|&x| {
                        1.0 + (0..k)
                            .map(|j| {
                                let sign = if b >> j & 1 == 1 { 1.0 } else { -1.0 };
                                2.0 * sign * theta[j] * (TAU * (j + 1) as f64 * x).cos()
                            })
                            .sum::<f64>()
                    })
                    .product::<f64>()
            })
            .sum::<f64>()
            / verts as f64;
        let d = (lr - 1.0).powi(2);
        sum += d;
        sum_sq += d * d;
    }
    let r = reps as f64;
    let mean = sum / r;
    let var = ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0);
    Ok(Chi2Estimate {
        quadrature,
        monte_carlo: mean,
        std_error: (var / r).sqrt(),
    })
}

/// `(2^{-k} Σ_τ Π_j J_j^{τ_j}, Π_j (J_j^- + J_j^+)/2)`.
pub fn cube_product_identity(j_plus: &[f64], j_minus: &[f64]) -> Result<(f64, f64)> {
    if j_plus.len() != j_minus.len() {
        return Err(Error::InvalidParameter("J+ and J- differ in length".into()));
    }
    let k = j_plus.len();
    if k > MAX_ENUMERATED_DIM {
        return Err(Error::TooLarge { what: "cube dimension", value: k, max: MAX_ENUMERATED_DIM });
    }
    let lhs = (0..1u64 << k)
        .map(|b| {
            (0..k)
                .map(|j| if b >> j & 1 == 1 { j_plus[j] } else { j_minus[j] })
                .product::<f64>()
        })
        .sum::<f64>()
        / (1u64 << k) as f64;
    let rhs = j_plus.iter().zip(j_minus).map(|(p, m)| (p + m) / 2.0).product();
    Ok((lhs, rhs))
}

/// Two single-frequency hypotheses `f^±_{±m} = (1 ± ξ) C a_m`.
#[derive(Debug, Clone, Serialize)]
pub struct TwoPointPair {
    pub f_plus: FourierDensity,
    pub f_minus: FourierDensity,
    pub m: usize,
    pub xi: f64,
    pub c: f64,
    pub a_m: f64,
    /// `ε_m` as used for the images `f^± ⊛ ε`.
    pub eps_m: Complex64,
    pub n: usize,
    pub conditions: Vec<ConditionCheck>,
}

/// Amplitude constant `C = (1/4 ∧ R/√8)/√2`. The extra `1/√2` accounts for
/// both frequencies `±m` in `‖f^+ ⊛ ε - f^- ⊛ ε‖² = 8 ξ² C² a_m² |ε_m|²`,
/// which keeps that norm below `1/(4n)`.
pub fn two_point_amplitude(radius: f64) -> f64 {
    0.25f64.min(radius / 8f64.sqrt()) / 2f64.sqrt()
}

pub fn build_two_point(cls: &SmoothnessClass, eps: &NoiseModel, n: usize, m: usize) -> Result<TwoPointPair> {
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if m == 0 {
        return Err(Error::ZeroDimension);
    }
    let a_m = cls.a(m);
    let eps_mod = eps.checked_modulus(m)?;
    let xi = (1.0f64 / (n as f64 * a_m * a_m * eps_mod * eps_mod)).min(1.0).sqrt();
    let c = two_point_amplitude(cls.radius());
    let single = |amp: f64| {
        let mut tail = vec![Complex64::new(0.0, 0.0); m];
        tail[m - 1] = Complex64::new(amp, 0.0);
        FourierDensity::from_tail(tail)
    };
    let f_plus = single((1.0 + xi) * c * a_m)?;
    let f_minus = single((1.0 - xi) * c * a_m)?;
    let mut pair = TwoPointPair {
        f_plus,
        f_minus,
        m,
        xi,
        c,
        a_m,
        eps_m: eps.coeff(m as i64),
        n,
        conditions: Vec::new(),
    };
    pair.conditions = pair.check(cls);
    first_failure("two-point", &pair.conditions)?;
    Ok(pair)
}

impl TwoPointPair {
    fn image_diff_sq(&self) -> f64 {
        let d = (self.f_plus.coeff(self.m as i64) - self.f_minus.coeff(self.m as i64)) * self.eps_m;
        2.0 * d.norm_sqr()
    }

    /// `(𝕡² - 𝕢²)² = (q(f^+) - q(f^-))²`.
    pub fn separation_sq(&self) -> f64 {
        (self.f_plus.quadratic_functional() - self.f_minus.quadratic_functional()).powi(2)
    }

    fn check(&self, cls: &SmoothnessClass) -> Vec<ConditionCheck> {
        let m = self.m as i64;
        let l2 = self.f_plus.quadratic_functional() + self.f_minus.quadratic_functional();
        let sym = (self.f_plus.coeff(-m) - self.f_plus.coeff(m).conj()).norm()
            + (self.f_minus.coeff(-m) - self.f_minus.coeff(m).conj()).norm();
        let lower_l1 = 2.0 * self.f_minus.coeff(m).norm() * self.eps_m.norm();
        let smooth = self
            .f_plus
            .ellipsoid_membership(cls)
            .lhs
            .max(self.f_minus.ellipsoid_membership(cls).lhs);
        let target = 64.0 * self.xi * self.xi * self.c.powi(4) * self.a_m.powi(4);
        vec![
            ConditionCheck::le("a", "square summable", if l2.is_finite() { 0.0 } else { 1.0 }, 0.0),
            ConditionCheck::eq("b", "hermitian symmetry", sym, 0.0),
            ConditionCheck::eq("c", "f_0 = 1", self.f_plus.coeff(0).re.min(self.f_minus.coeff(0).re), 1.0),
            ConditionCheck::le("d", "positivity: sum |f_j| <= 1", self.f_plus.tail_l1().max(self.f_minus.tail_l1()), 1.0),
            ConditionCheck::le("e", "bounded below: sum |f^-_j||eps_j| <= 1/2", lower_l1, 0.5),
            ConditionCheck::le("f", "smoothness: ellipsoid membership", smooth, cls.radius().powi(2)),
            ConditionCheck::eq("g", "separation: (p^2 - q^2)^2 = 64 xi^2 C^4 a_m^4", self.separation_sq(), target),
            ConditionCheck::le("h", "similarity: ||g^+ - g^-||^2 <= 1/(4n)", self.image_diff_sq(), 0.25 / self.n as f64),
        ]
    }
}

/// `(1/8)(𝕡² - 𝕢²)² (1 - 2n‖f^+ ⊛ ε - f^- ⊛ ε‖²)`, a lower bound on the
/// minimax estimation risk.
pub fn hellinger_reduction_bound(pair: &TwoPointPair, n: usize) -> f64 {
    pair.separation_sq() * (1.0 - 2.0 * n as f64 * pair.image_diff_sq()) / 8.0
}

/// Hellinger affinity `∫ sqrt(g^+ g^-)` of the two image densities, by
/// trapezoid quadrature.
pub fn hellinger_affinity(pair: &TwoPointPair) -> f64 {
    let gp = pair.f_plus.coeff(pair.m as i64) * pair.eps_m;
    let gm = pair.f_minus.coeff(pair.m as i64) * pair.eps_m;
    let eval = |c: Complex64, x: f64| {
        let (s, co) = (TAU * pair.m as f64 * x).sin_cos();
        1.0 + 2.0 * (c.re * co - c.im * s)
    };
    (0..DIAGNOSTIC_GRID)
        .map(|i| {
            let x = i as f64 / DIAGNOSTIC_GRID as f64;
            (eval(gp, x).max(0.0) * eval(gm, x).max(0.0)).sqrt()
        })
        .sum::<f64>()
        / DIAGNOSTIC_GRID as f64
}

/// `(1/8) h²(P^+, P^-) (𝕡² - 𝕢²)²` with the exact `n`-sample affinity.
pub fn hellinger_reduction_exact(pair: &TwoPointPair, n: usize) -> f64 {
    pair.separation_sq() * hellinger_affinity(pair).powi(2 * n as i32) / 8.0
}

/// `(1 - α) (A̲²)²/8 · (ρ²)²`, with `a_lower_sq` the squared lower
/// separation constant `A̲²`.
pub fn testing_to_estimation_lb(rho_sq: f64, alpha: f64, a_lower_sq: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {alpha}")));
    }
    if !(rho_sq >= 0.0 && a_lower_sq >= 0.0) {
        return Err(Error::InvalidParameter("inputs must be nonnegative".into()));
    }
    Ok((1.0 - alpha) * a_lower_sq * a_lower_sq / 8.0 * rho_sq * rho_sq)
}
