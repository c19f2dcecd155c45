use circdeconv::estimation::optimal_dim_est;
use circdeconv::harness::experiment::{mean_se, replicate, thread_pool};
use circdeconv::harness::report::ReportRows;
use circdeconv::harness::{run_test_experiment, ExperimentConfig, KRule, NoiseSpec, Scenario, SmoothnessSpec};
use circdeconv::sampling::{sample_model, ModelSampler, SamplerConfig};
use circdeconv::testing::{calibrate, calibrate_custom, calibration_margins, min_radius, nu_k_sq, radius_upper, run_test, run_test_coeffs, Decision};
use circdeconv::estimation::EmpiricalCoeffs;
use circdeconv::{Error, FourierDensity, NoiseModel, SimRng, SmoothnessClass};

#[test]
fn nu_without_noise() {
    let eps = NoiseModel::direct();
    for (n, k) in [(10, 1), (100, 7), (2, 3)] {
        let expect = (2.0 * k as f64).sqrt() / n as f64;
        assert!((nu_k_sq(&eps, n, k).unwrap() - expect).abs() < 1e-15);
    }
}

#[test]
fn explicit_constants_meet_both_margins() {
    for alpha in [0.01, 0.05, 0.2, 0.5, 0.9] {
        for sup in [1.0, 1.5, 2.0, 10.0] {
            let eps = NoiseModel::direct().with_sup_norm(sup).unwrap();
            let cal = calibrate(alpha, &eps, 1.0).unwrap();
            assert!((cal.c_alpha - 6.0 * sup / alpha).abs() < 1e-12);
            let (m1, m2) = calibration_margins(cal.c_alpha, cal.a_tilde, sup);
            assert!(m1 <= alpha / 2.0 && m2 <= alpha / 2.0, "alpha={alpha} sup={sup}: {m1} {m2}");
            assert!((cal.a_bar - (1.0 + cal.a_tilde.powi(2)).sqrt()).abs() < 1e-12);
        }
    }
}

#[test]
fn custom_constants_are_checked() {
    let eps = NoiseModel::direct();
    assert!(matches!(calibrate_custom(0.05, &eps, 1.0, 2.0, 3.0), Err(Error::Calibration(_))));
    assert!(calibrate_custom(0.05, &eps, 1.0, 1000.0, 2000.0).is_ok());
    assert!(calibrate(1.0, &eps, 1.0).is_err());
}

#[test]
fn radius_minimum_is_below_radius_at_optimal_dimension() {
    let cls = SmoothnessClass::ordinary(1.5, 1.0).unwrap();
    let eps = NoiseModel::severe(0.5).unwrap();
    for n in [10, 1000, 100_000] {
        let (k, rho) = min_radius(&cls, &eps, n, 1 << 12).unwrap();
        let brute = (1..200).map(|j| radius_upper(&cls, &eps, n, j).unwrap()).fold(f64::INFINITY, f64::min);
        assert!((rho - brute).abs() <= 1e-15 * brute, "n={n}");
        assert_eq!(radius_upper(&cls, &eps, n, k).unwrap(), rho);
        let kappa = optimal_dim_est(&cls, &eps, n, 1 << 12).unwrap();
        assert!(rho <= radius_upper(&cls, &eps, n, kappa).unwrap());
    }
}

#[test]
fn type_one_error_without_noise_is_below_level() {
    let eps = NoiseModel::direct();
    let cal = calibrate(0.2, &eps, 1.0).unwrap();
    let pool = thread_pool(None).unwrap();
    let sampler = ModelSampler::new(&FourierDensity::uniform(0), &eps, &SamplerConfig::default()).unwrap();
    let hits = replicate(&pool, &SimRng::seed_from(41), 5000, |r| {
        let mut buf = Vec::new();
        sampler.fill(200, r, &mut buf);
        let t = run_test_coeffs(&EmpiricalCoeffs::from_values(&buf, 4)?, &eps, 4, &cal)?;
        Ok(if t.decision == Decision::RejectNull { 1.0 } else { 0.0 })
    })
    .unwrap();
    assert!(mean_se(&hits).mean <= 0.2);
}

#[test]
fn far_alternative_is_detected() {
    // a_j = 0.1/j, R² = 1024, no noise: a single coefficient of 1/2 at j = 1
    // lies in the class with q_7(f) above Ā² ρ_7²
    let cls = SmoothnessClass::ordinary(1.0, 32.0).unwrap().with_scale(0.1).unwrap();
    let eps = NoiseModel::direct();
    let (n, k, alpha) = (20_000, 7, 0.5);
    let cal = calibrate(alpha, &eps, 32.0).unwrap();
    let f = FourierDensity::from_real_tail(&[0.5]).unwrap();
    assert!(f.ellipsoid_membership(&cls).inside);
    let rho = radius_upper(&cls, &eps, n, k).unwrap();
    assert!(f.truncated_functional(k).unwrap() >= cal.a_bar.powi(2) * rho);
    let mut rng = SimRng::seed_from(42);
    let reps = 200;
    let rejections = (0..reps)
        .filter(|_| {
            let s = sample_model(&f, &eps, n, &mut rng).unwrap();
            run_test(&s, &eps, k, &cal).unwrap().decision == Decision::RejectNull
        })
        .count();
    assert!(rejections as f64 / reps as f64 >= 1.0 - alpha / 2.0);
}

#[test]
fn tie_rejects() {
    let eps = NoiseModel::direct();
    let cal = calibrate_custom(0.5, &eps, 1.0, 100.0, 200.0).unwrap();
    // two points at distance 0 give q̂_1 = 2, threshold C ν_1² = 100·sqrt(2)/2
    let s = circdeconv::CircularSample::from_values(vec![0.25, 0.25], "tie").unwrap();
    let r = run_test(&s, &eps, 1, &cal).unwrap();
    assert!((r.statistic - 2.0).abs() < 1e-15);
    let tied = calibrate_custom(0.5, &eps, 1.0, 2.0 / r.nu_k_sq, 1e6);
    if let Ok(tied) = tied {
        assert_eq!(run_test(&s, &eps, 1, &tied).unwrap().decision, Decision::RejectNull);
    }
    assert_eq!(r.decision, Decision::AcceptNull);
}

#[test]
fn type_two_error_decreases_along_the_ladder() {
    let mut cfg = ExperimentConfig::new(
        SmoothnessSpec::Ordinary { s: 1.0, radius: 64.0, scale: 0.1 },
        NoiseSpec::Direct { sup_norm: None },
        vec![400],
    );
    cfg.alpha = 0.5;
    cfg.k_rule = KRule::Fixed(8);
    cfg.replications = Some(2000);
    cfg.a_ladder = vec![1.0, 2.0, 3.0, 3.5, 4.0, 5.0, 6.0];
    cfg.scenarios = Some(vec![Scenario::Null, Scenario::Spike]);
    cfg.seed = 43;
    let report = run_test_experiment(&cfg).unwrap();
    let ReportRows::Test(rows) = &report.rows else { panic!("wrong kind") };
    let spikes: Vec<_> = rows.iter().filter(|r| r.scenario == "spike" && r.feasible).collect();
    assert_eq!(spikes.len(), 7);
    assert!(spikes[0].type_ii.unwrap() > 0.9 && spikes[6].type_ii.unwrap() < 0.1);
    for w in spikes.windows(2) {
        let (a, b) = (w[0].type_ii.unwrap(), w[1].type_ii.unwrap());
        let se = (w[0].rejection_se.unwrap().powi(2) + w[1].rejection_se.unwrap().powi(2)).sqrt();
        assert!(b <= a + 3.0 * se, "type II rose from {a} to {b}");
    }
}
