use rayon::prelude::*;
use rayon::ThreadPool;

use super::config::{ExperimentConfig, KRule, NoiseSpec, Scenario, SmoothnessSpec, DEFAULT_RISK_REPLICATIONS, DEFAULT_TEST_REPLICATIONS, RISK_SCENARIOS, TEST_SCENARIOS};
use super::report::{ExperimentReport, FitRecord, ReportMetadata, ReportRows, RiskRow, SummaryRow, TestRow};
use crate::error::{Error, Result};
use crate::estimation::{estimate_from_coeffs, exact_risk, optimal_dim_est, risk_upper_bound, EmpiricalCoeffs};
use crate::fourier::{FourierDensity, NoiseModel, SmoothnessClass};
use crate::lower_bounds::{build_hypercube, build_two_point, HypercubeFamily};
use crate::rates::{base_term, fit_rate, theoretical_estimation_rate, theoretical_testing_radius, IllPosedness, RateModel, RegimeSpec, SmoothnessRegime, DEFAULT_BASE_WINDOW};
use crate::sampling::{noise_sampler, wrap_add, ModelSampler, RejectionSampler, SamplerConfig, SimRng};
use crate::testing::{min_radius, radius_upper, run_test_coeffs, Decision, TestCalibration};

pub const REPORT_LABEL: &str = "lower proxy: maximum over a finite stress set of densities";

/// Mean and standard error (`sd/√reps`, `sd` with `reps - 1`) of
/// per-replication values, accumulated in index order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

pub fn mean_se(values: &[f64]) -> MeanSe {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let se = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se }
}

pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Runs `reps` replications in `pool`. Replication `i` receives
/// `rng.child(i)`; results come back in index order.
pub fn replicate<T, F>(pool: &ThreadPool, rng: &SimRng, reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SimRng) -> Result<T> + Sync + Send,
{
    pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|i| f(&mut rng.child(i as u64)))
            .collect()
    })
}

/// Dimension used at sample size `n`.
pub fn dimension(rule: KRule, cls: &SmoothnessClass, eps: &NoiseModel, n: usize, k_max: usize) -> Result<usize> {
    match rule {
        KRule::Fixed(k) => Ok(k),
        KRule::KappaStar => optimal_dim_est(cls, eps, n, k_max),
    }
}

fn regime(cfg: &ExperimentConfig) -> Option<RegimeSpec> {
    let s = match cfg.smoothness {
        SmoothnessSpec::Ordinary { s, .. } => SmoothnessRegime::Ordinary(s),
        SmoothnessSpec::Super { s, .. } => SmoothnessRegime::Super(s),
        SmoothnessSpec::Explicit { .. } => return None,
    };
    let p = match cfg.noise {
        NoiseSpec::Mild { p, .. } => IllPosedness::Mild(p),
        NoiseSpec::Severe { p, .. } => IllPosedness::Severe(p),
        _ => return None,
    };
    RegimeSpec::new(s, p).ok()
}

fn power_fit(quantity: &str, ns: &[usize], values: &[Option<f64>], target: Option<f64>) -> Option<FitRecord> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(values)
        .filter_map(|(&n, v)| v.filter(|x| *x > 0.0).map(|x| (n as f64, x)))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let f = fit_rate(&xs, &ys, RateModel::Power).ok()?;
    Some(FitRecord {
        quantity: quantity.to_string(),
        slope: f.slope,
        log_exponent: f.log_exponent,
        r_squared: f.r_squared,
        target,
    })
}

fn metadata(cfg: &ExperimentConfig, kind: &str, reps: usize) -> Result<ReportMetadata> {
    Ok(ReportMetadata {
        kind: kind.to_string(),
        config_hash: cfg.config_hash()?,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        replications: reps,
        label: REPORT_LABEL.to_string(),
    })
}

fn scenarios(cfg: &ExperimentConfig, allowed: &[Scenario]) -> Result<Vec<Scenario>> {
    let list = cfg.scenarios.clone().unwrap_or_else(|| allowed.to_vec());
    if let Some(s) = list.iter().find(|s| !allowed.contains(s)) {
        return Err(Error::InvalidParameter(format!("scenario {s:?} does not apply to this experiment")));
    }
    Ok(list)
}

struct StressDensity {
    scenario: &'static str,
    variant: String,
    density: std::result::Result<FourierDensity, String>,
}

/// Single-frequency density `f_m = min(R a_m/√2, 1/2)`, on the ellipsoid
/// boundary unless capped by positivity.
pub fn boundary_density(cls: &SmoothnessClass, m: usize) -> Result<FourierDensity> {
    let amp = (cls.radius() * cls.a(m) / 2f64.sqrt()).min(0.5);
    let mut tail = vec![0.0; m];
    tail[m - 1] = amp;
    FourierDensity::from_real_tail(&tail)
}

fn stress_set(
    cfg: &ExperimentConfig,
    cls: &SmoothnessClass,
    eps: &NoiseModel,
    n: usize,
    k: usize,
    chosen: &[Scenario],
) -> Result<Vec<StressDensity>> {
    let mut out = Vec::new();
    let m_star = base_term(cls, eps, n, DEFAULT_BASE_WINDOW)?.m_star;
    for s in chosen {
        match s {
            Scenario::Null => out.push(StressDensity {
                scenario: "null",
                variant: String::new(),
                density: Ok(FourierDensity::uniform(0)),
            }),
            Scenario::Boundary => {
                let mut ms = vec![1, k, k + 1, m_star];
                ms.sort_unstable();
                ms.dedup();
                for m in ms {
                    out.push(StressDensity {
                        scenario: "boundary",
                        variant: format!("m={m}"),
                        density: boundary_density(cls, m).map_err(|e| e.to_string()),
                    });
                }
            }
            Scenario::Hypercube => out.push(StressDensity {
                scenario: "hypercube",
                variant: "all-plus".into(),
                density: build_hypercube(cls, eps, n, cfg.alpha, cfg.k_max)
                    .map(|h| h.vertex(&vec![true; h.kappa]))
                    .map_err(|e| e.to_string()),
            }),
            Scenario::TwoPoint => match build_two_point(cls, eps, n, m_star) {
                Ok(pair) => {
                    for (v, f) in [("plus", pair.f_plus), ("minus", pair.f_minus)] {
                        out.push(StressDensity {
                            scenario: "two_point",
                            variant: format!("{v} m={m_star}"),
                            density: Ok(f),
                        });
                    }
                }
                Err(e) => out.push(StressDensity {
                    scenario: "two_point",
                    variant: format!("m={m_star}"),
                    density: Err(e.to_string()),
                }),
            },
            Scenario::HypercubeMixture | Scenario::Spike => unreachable!("filtered by scenarios()"),
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of `E(q̂_k - q(f))²` over the stress set for every
/// `n`, next to the exact risk and the uniform upper bound.
pub fn run_risk_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cls = cfg.smoothness.build()?;
    let eps = cfg.noise.build()?;
    if !eps.is_simulatable() {
        return Err(Error::NotSimulatable);
    }
    let chosen = scenarios(cfg, &RISK_SCENARIOS)?;
    let reps = cfg.replications.unwrap_or(DEFAULT_RISK_REPLICATIONS);
    let pool = thread_pool(cfg.threads)?;
    let root = SimRng::seed_from(cfg.seed);
    let sampler_cfg = SamplerConfig::default();

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut cell = 0u64;
    for &n in &cfg.n_grid {
        let k = dimension(cfg.k_rule, &cls, &eps, n, cfg.k_max)?;
        let bound = risk_upper_bound(&cls, &eps, n, k)?.total;
        let first_row = rows.len();
        for sd in stress_set(cfg, &cls, &eps, n, k, &chosen)? {
            cell += 1;
            let f = match sd.density {
                Ok(f) if f.is_certified_nonnegative() && f.ellipsoid_membership(&cls).inside => f,
                Ok(_) => {
                    rows.push(skipped_risk_row(n, k, bound, sd.scenario, sd.variant, "outside the class".into()));
                    continue;
                }
                Err(e) => {
                    rows.push(skipped_risk_row(n, k, bound, sd.scenario, sd.variant, format!("not constructed: {e}")));
                    continue;
                }
            };
            let q = f.quadratic_functional();
            let sampler = ModelSampler::new(&f, &eps, &sampler_cfg)?;
            let rng = root.child(cell);
            let estimates = replicate(&pool, &rng, reps, |r| {
                let mut buf = Vec::with_capacity(n);
                sampler.fill(n, r, &mut buf);
                estimate_from_coeffs(&EmpiricalCoeffs::from_values(&buf, k)?, &eps, k)
            })?;
            let sq: Vec<f64> = estimates.iter().map(|e| (e - q).powi(2)).collect();
            let risk = mean_se(&sq);
            rows.push(RiskRow {
                n,
                scenario: sd.scenario.into(),
                variant: sd.variant,
                k,
                q: Some(q),
                q_k: Some(f.truncated_functional(k)?),
                mean_estimate: Some(mean_se(&estimates).mean),
                risk: Some(risk.mean),
                risk_se: Some(risk.se),
                exact_risk: Some(exact_risk(&f, &eps, n, k)?),
                bound,
                note: String::new(),
            });
        }
        let cells = &rows[first_row..];
        let worst = cells
            .iter()
            .filter(|r| r.risk.is_some())
            .max_by(|a, b| a.risk.partial_cmp(&b.risk).unwrap_or(std::cmp::Ordering::Equal));
        summary.push(SummaryRow {
            n,
            a: None,
            k,
            value: worst.and_then(|r| r.risk),
            value_se: worst.and_then(|r| r.risk_se),
            exact: cells.iter().filter_map(|r| r.exact_risk).reduce(f64::max),
            reference: bound,
        });
    }

    let target = regime(cfg)
        .and_then(|r| theoretical_estimation_rate(&r).ok())
        .filter(|r| r.estimation_rate.log_exp == 0.0)
        .map(|r| r.estimation_rate.n_exp);
    let ns: Vec<usize> = summary.iter().map(|s| s.n).collect();
    let fits = [
        power_fit("max_risk", &ns, &summary.iter().map(|s| s.value).collect::<Vec<_>>(), target),
        power_fit("max_exact_risk", &ns, &summary.iter().map(|s| s.exact).collect::<Vec<_>>(), target),
        power_fit("upper_bound", &ns, &summary.iter().map(|s| Some(s.reference)).collect::<Vec<_>>(), target),
    ]
    .into_iter()
    .flatten()
    .collect();

    Ok(ExperimentReport {
        metadata: metadata(cfg, "risk", reps)?,
        rows: ReportRows::Risk(rows),
        summary,
        fits,
    })
}

fn skipped_risk_row(n: usize, k: usize, bound: f64, scenario: &str, variant: String, note: String) -> RiskRow {
    RiskRow {
        n,
        scenario: scenario.into(),
        variant,
        k,
        q: None,
        q_k: None,
        mean_estimate: None,
        risk: None,
        risk_se: None,
        exact_risk: None,
        bound,
        note,
    }
}

fn rejection_rate<F>(pool: &ThreadPool, rng: &SimRng, reps: usize, draw_sample: F, eps: &NoiseModel, k: usize, cal: &TestCalibration) -> Result<MeanSe>
where
    F: Fn(&mut SimRng, &mut Vec<f64>) + Sync + Send,
{
    let hits = replicate(pool, rng, reps, |r| {
        let mut buf = Vec::new();
        draw_sample(r, &mut buf);
        let res = run_test_coeffs(&EmpiricalCoeffs::from_values(&buf, k)?, eps, k, cal)?;
        Ok(if res.decision == Decision::RejectNull { 1.0 } else { 0.0 })
    })?;
    Ok(mean_se(&hits))
}

/// Rejection frequencies of the calibrated test under the null and under
/// alternatives at separation `A ρ` for every `A` in the ladder.
pub fn run_test_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cls = cfg.smoothness.build()?;
    let eps = cfg.noise.build()?;
    if !eps.is_simulatable() {
        return Err(Error::NotSimulatable);
    }
    let chosen = scenarios(cfg, &TEST_SCENARIOS)?;
    let reps = cfg.replications.unwrap_or(DEFAULT_TEST_REPLICATIONS);
    let cal = cfg.calibration.build(cfg.alpha, &eps, cls.radius())?;
    let pool = thread_pool(cfg.threads)?;
    let root = SimRng::seed_from(cfg.seed);
    let sampler_cfg = SamplerConfig::default();
    let noise = noise_sampler(&eps, &sampler_cfg)?;
    let max_q = (cls.a(1) * cls.radius()).powi(2);

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut rhos = Vec::new();
    let mut cell = 0u64;
    for &n in &cfg.n_grid {
        let k = dimension(cfg.k_rule, &cls, &eps, n, cfg.k_max)?;
        let rho_sq = match cfg.k_rule {
            KRule::KappaStar => min_radius(&cls, &eps, n, cfg.k_max)?.1,
            KRule::Fixed(k) => radius_upper(&cls, &eps, n, k)?,
        };
        rhos.push(rho_sq);
        let cube = build_hypercube(&cls, &eps, n, cfg.alpha, cfg.k_max);
        let ladder = if cfg.a_ladder.is_empty() {
            let lower = cube.as_ref().map(|h| (h.zeta * h.eta).sqrt()).map_err(|e| Error::InvalidParameter(format!("default A ladder needs the lower-bound construction: {e}")))?;
            vec![lower, cal.a_bar]
        } else {
            cfg.a_ladder.clone()
        };

        cell += 1;
        let null_sampler = ModelSampler::new(&FourierDensity::uniform(0), &eps, &sampler_cfg)?;
        let null = rejection_rate(&pool, &root.child(cell), reps, |r, buf| null_sampler.fill(n, r, buf), &eps, k, &cal)?;

        for &a in &ladder {
            let sep = a * a * rho_sq;
            let vacuous = sep > max_q;
            let mut worst: Option<(f64, f64)> = if vacuous { Some((0.0, 0.0)) } else { None };
            for s in &chosen {
                cell += 1;
                let base_row = TestRow {
                    n,
                    scenario: String::new(),
                    a,
                    k,
                    rho_sq,
                    separation_sq: sep,
                    rejection_rate: None,
                    rejection_se: None,
                    type_i: Some(null.mean),
                    type_ii: None,
                    error_sum: None,
                    error_sum_se: None,
                    feasible: true,
                    vacuous,
                    note: String::new(),
                };
                if *s == Scenario::Null {
                    rows.push(TestRow {
                        scenario: "null".into(),
                        rejection_rate: Some(null.mean),
                        rejection_se: Some(null.se),
                        error_sum: Some(null.mean),
                        error_sum_se: Some(null.se),
                        ..base_row
                    });
                    continue;
                }
                let name = if *s == Scenario::Spike { "spike" } else { "hypercube_mixture" };
                if vacuous {
                    rows.push(TestRow {
                        scenario: name.into(),
                        type_ii: Some(0.0),
                        error_sum: Some(null.mean),
                        error_sum_se: Some(null.se),
                        feasible: false,
                        note: "no density in the class reaches this separation".into(),
                        ..base_row
                    });
                    continue;
                }
                let alt = match s {
                    Scenario::Spike => spike(&cls, k, sep).map(Alternative::Single),
                    _ => match &cube {
                        Ok(c) => mixture(c, &cls, &eps, sep).map(Alternative::Mixture),
                        Err(e) => Err(e.to_string()),
                    },
                };
                let rate = match alt {
                    Err(note) => {
                        rows.push(TestRow {
                            scenario: name.into(),
                            feasible: false,
                            note,
                            ..base_row
                        });
                        continue;
                    }
                    Ok(Alternative::Single(f)) => {
                        let sampler = ModelSampler::new(&f, &eps, &sampler_cfg)?;
                        rejection_rate(&pool, &root.child(cell), reps, |r, buf| sampler.fill(n, r, buf), &eps, k, &cal)?
                    }
                    Ok(Alternative::Mixture(fam)) => {
                        let draw = |r: &mut SimRng, buf: &mut Vec<f64>| {
                            let vertex = RejectionSampler::new(fam.random_vertex(r)).expect("feasible vertices are certified");
                            buf.clear();
                            for _ in 0..n {
                                let x = vertex.draw(r);
                                buf.push(match &noise {
                                    Some(ns) => wrap_add(x, ns.draw(r)),
                                    None => x,
                                });
                            }
                        };
                        rejection_rate(&pool, &root.child(cell), reps, draw, &eps, k, &cal)?
                    }
                };
                let type_ii = 1.0 - rate.mean;
                let se = (null.se.powi(2) + rate.se.powi(2)).sqrt();
                if worst.is_none_or(|(w, _)| type_ii > w) {
                    worst = Some((type_ii, rate.se));
                }
                rows.push(TestRow {
                    scenario: name.into(),
                    rejection_rate: Some(rate.mean),
                    rejection_se: Some(rate.se),
                    type_ii: Some(type_ii),
                    error_sum: Some(null.mean + type_ii),
                    error_sum_se: Some(se),
                    ..base_row
                });
            }
            summary.push(SummaryRow {
                n,
                a: Some(a),
                k,
                value: worst.map(|(w, _)| null.mean + w),
                value_se: worst.map(|(_, s)| (null.se.powi(2) + s * s).sqrt()),
                exact: None,
                reference: cal.a_bar,
            });
        }
    }

    let target = regime(cfg)
        .and_then(|r| theoretical_testing_radius(&r).ok())
        .filter(|r| r.testing_radius.log_exp == 0.0)
        .map(|r| r.testing_radius.n_exp);
    let fits = power_fit("rho_sq", &cfg.n_grid, &rhos.iter().map(|&r| Some(r)).collect::<Vec<_>>(), target)
        .into_iter()
        .collect();

    Ok(ExperimentReport {
        metadata: metadata(cfg, "test", reps)?,
        rows: ReportRows::Test(rows),
        summary,
        fits,
    })
}

enum Alternative {
    Single(FourierDensity),
    Mixture(HypercubeFamily),
}

fn spike(cls: &SmoothnessClass, k: usize, sep: f64) -> std::result::Result<FourierDensity, String> {
    let amp = (sep / 2.0).sqrt();
    let mut tail = vec![0.0; k];
    tail[k - 1] = amp;
    let f = FourierDensity::from_real_tail(&tail).map_err(|e| e.to_string())?;
    if !f.is_certified_nonnegative() {
        return Err(format!("positivity fails: sum |f_j| = {}", f.tail_l1()));
    }
    let m = f.ellipsoid_membership(cls);
    if !m.inside {
        return Err(format!("outside the ellipsoid: {} > R^2", m.lhs));
    }
    Ok(f)
}

fn mixture(cube: &HypercubeFamily, cls: &SmoothnessClass, eps: &NoiseModel, sep: f64) -> std::result::Result<HypercubeFamily, String> {
    let fam = cube.with_separation(cls, eps, sep).map_err(|e| e.to_string())?;
    match fam.conditions.iter().find(|c| !c.holds && c.label != "g") {
        Some(c) => Err(format!("condition ({}) fails: {} > {}", c.label, c.lhs, c.rhs)),
        None => Ok(fam),
    }
}
