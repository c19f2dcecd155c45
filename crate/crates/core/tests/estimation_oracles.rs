use std::f64::consts::TAU;

use circdeconv::estimation::{
    estimate_q_clamped, estimate_q_values, exact_risk, exact_variance, optimal_dim_est, risk_bound_printed, risk_upper_bound,
    ustat_components, ustat_kernel, variance_bound, EmpiricalCoeffs, estimate_from_coeffs,
};
use circdeconv::harness::experiment::{mean_se, replicate, thread_pool};
use circdeconv::rates::{fit_rate, RateModel};
use circdeconv::sampling::{sample_model, ModelSampler, SamplerConfig};
use circdeconv::{CircularSample, Error, FourierDensity, NoiseModel, SimRng, SmoothnessClass};
use rand::Rng;

fn kernel(y1: f64, y2: f64, eps: &NoiseModel, k: usize) -> f64 {
    (1..=k)
        .map(|j| 2.0 * (TAU * j as f64 * (y2 - y1)).cos() / eps.modulus(j).powi(2))
        .sum()
}

fn density() -> FourierDensity {
    FourierDensity::from_real_tail(&[0.25, 0.1, -0.05]).unwrap()
}

#[test]
fn ustat_components_match_grid_quadrature() {
    let f = density();
    let eps = NoiseModel::mild_truncated(1.0, 8).unwrap();
    let g = f.convolve(eps.density().unwrap());
    for k in 1..=4 {
        let pts = 64;
        let ys: Vec<f64> = (0..pts).map(|i| i as f64 / pts as f64).collect();
        let gv: Vec<f64> = ys.iter().map(|&y| g.evaluate(y)).collect();
        let qk = f.truncated_functional(k).unwrap();
        let mut e_h1_sq = 0.0;
        let mut e_h_sq = 0.0;
        for a in 0..pts {
            let mut h1 = 0.0;
            for b in 0..pts {
                let h = kernel(ys[a], ys[b], &eps, k);
                h1 += h * gv[b] / pts as f64;
                e_h_sq += h * h * gv[a] * gv[b] / (pts * pts) as f64;
            }
            e_h1_sq += h1 * h1 * gv[a] / pts as f64;
        }
        let (xi1, xi2) = ustat_components(&f, &eps, k).unwrap();
        assert!((xi1 - (e_h1_sq - qk * qk)).abs() < 1e-9 * (1.0 + e_h1_sq), "k={k}: xi1 {xi1}");
        assert!((xi2 - (e_h_sq - qk * qk)).abs() < 1e-9 * e_h_sq, "k={k}: xi2 {xi2}");
    }
}

/// `E(q̂_k²)` over all `n`-tuples of grid points, exact for trigonometric
/// polynomials of low degree.
fn tensor_second_moment(g: &FourierDensity, eps: &NoiseModel, n: usize, k: usize, pts: usize) -> (f64, f64) {
    let ys: Vec<f64> = (0..pts).map(|i| i as f64 / pts as f64).collect();
    let gv: Vec<f64> = ys.iter().map(|&y| g.evaluate(y)).collect();
    let mut idx = vec![0usize; n];
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let w = 1.0 / (pts as f64).powi(n as i32);
    for flat in 0..pts.pow(n as u32) {
        let mut r = flat;
        for slot in idx.iter_mut() {
            *slot = r % pts;
            r /= pts;
        }
        let y: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
        let weight: f64 = idx.iter().map(|&i| gv[i]).product::<f64>() * w;
        let q = estimate_q_values(&y, eps, k).unwrap();
        m1 += q * weight;
        m2 += q * q * weight;
    }
    (m1, m2)
}

#[test]
fn exact_variance_matches_tensor_quadrature_for_small_n() {
    let f = FourierDensity::from_real_tail(&[0.3, 0.1]).unwrap();
    let eps = NoiseModel::mild_truncated(1.0, 2).unwrap();
    let g = f.convolve(eps.density().unwrap());
    for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
        let (m1, m2) = tensor_second_moment(&g, &eps, n, k, 12);
        let qk = f.truncated_functional(k).unwrap();
        assert!((m1 - qk).abs() < 1e-10, "n={n} k={k}: mean {m1} vs {qk}");
        let var = m2 - m1 * m1;
        let exact = exact_variance(&f, &eps, n, k).unwrap();
        assert!((var - exact).abs() < 1e-9 * exact, "n={n} k={k}: {var} vs {exact}");
    }
}

#[test]
fn estimator_is_mean_of_kernel_over_ordered_pairs() {
    let eps = NoiseModel::severe_truncated(1.0, 6).unwrap();
    let mut rng = SimRng::seed_from(31);
    for n in 2..=12 {
        let y: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        for k in 1..=4 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += ustat_kernel(y[i], y[j], &eps, k).unwrap();
                    }
                }
            }
            let pair_mean = s / (n * (n - 1)) as f64;
            let q = estimate_q_values(&y, &eps, k).unwrap();
            assert!((q - pair_mean).abs() < 1e-10 * (1.0 + q.abs()), "n={n} k={k}");
            assert!((ustat_kernel(y[0], y[1], &eps, k).unwrap() - kernel(y[0], y[1], &eps, k)).abs() < 1e-9);
        }
    }
}

#[test]
fn monte_carlo_variance_matches_exact_variance() {
    let f = density();
    let eps = NoiseModel::mild_truncated(1.0, 16).unwrap();
    let (n, k) = (60, 3);
    let sampler = ModelSampler::new(&f, &eps, &SamplerConfig::default()).unwrap();
    let pool = thread_pool(None).unwrap();
    let est = replicate(&pool, &SimRng::seed_from(32), 40_000, |r| {
        let mut buf = Vec::new();
        sampler.fill(n, r, &mut buf);
        estimate_from_coeffs(&EmpiricalCoeffs::from_values(&buf, k)?, &eps, k)
    })
    .unwrap();
    let m = mean_se(&est);
    let dev: Vec<f64> = est.iter().map(|e| (e - m.mean).powi(2)).collect();
    let v = mean_se(&dev);
    let exact = exact_variance(&f, &eps, n, k).unwrap();
    assert!((v.mean - exact).abs() <= 4.0 * v.se, "{} vs {exact} (se {})", v.mean, v.se);
}

#[test]
fn null_variance_without_noise_has_closed_form() {
    let eps = NoiseModel::direct();
    let f = FourierDensity::uniform(0);
    for (n, k) in [(2, 1), (10, 1), (100, 3)] {
        let v = exact_variance(&f, &eps, n, k).unwrap();
        let expect = 4.0 * k as f64 / (n * (n - 1)) as f64;
        assert!((v - expect).abs() < 1e-15, "n={n} k={k}: {v}");
    }
}

#[test]
fn printed_variance_term_is_below_the_exact_null_variance() {
    let eps = NoiseModel::direct();
    let f = FourierDensity::uniform(0);
    let (n, k) = (50, 2);
    let printed = risk_bound_printed(&f, &eps, n, k).unwrap();
    let exact = exact_variance(&f, &eps, n, k).unwrap();
    assert!(printed.variance_linear + printed.variance_quadratic < exact);
    assert!(variance_bound(&f, &eps, n, k).unwrap() >= exact);
}

fn random_member(cls: &SmoothnessClass, rng: &mut SimRng, len: usize) -> FourierDensity {
    // split the ellipsoid budget at random, then cap the l1 norm
    let w: Vec<f64> = (0..len).map(|_| rng.uniform()).collect();
    let total: f64 = w.iter().sum();
    let mut tail: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(i, wi)| {
            let amp = cls.radius() * cls.a(i + 1) * (wi / total / 2.0).sqrt();
            if rng.uniform() < 0.5 { -amp } else { amp }
        })
        .collect();
    let l1: f64 = 2.0 * tail.iter().map(|t| t.abs()).sum::<f64>();
    if l1 > 1.0 {
        tail.iter_mut().for_each(|t| *t /= l1);
    }
    FourierDensity::from_real_tail(&tail).unwrap()
}

#[test]
fn exact_risk_respects_uniform_bound_on_random_members() {
    let cls = SmoothnessClass::ordinary(1.0, 1.0).unwrap();
    let eps = NoiseModel::mild_truncated(1.0, 16).unwrap();
    let mut rng = SimRng::seed_from(33);
    for _ in 0..200 {
        let len = rng.random_range(1..=12);
        let f = random_member(&cls, &mut rng, len);
        assert!(f.ellipsoid_membership(&cls).inside && f.is_certified_nonnegative());
        let n = rng.random_range(2..=4000);
        let k = optimal_dim_est(&cls, &eps, n, 16).unwrap();
        let risk = exact_risk(&f, &eps, n, k).unwrap();
        let bound = risk_upper_bound(&cls, &eps, n, k).unwrap().total;
        assert!(risk <= bound, "n={n} k={k}: {risk} > {bound}");
        let var = exact_variance(&f, &eps, n, k).unwrap();
        assert!(var <= variance_bound(&f, &eps, n, k).unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn optimal_dimension_matches_definition() {
    let cls = SmoothnessClass::ordinary(1.0, 1.0).unwrap();
    let eps = NoiseModel::mild(1.0).unwrap();
    for n in [2, 10, 100, 1000, 12345, 1 << 20] {
        let k = optimal_dim_est(&cls, &eps, n, 1 << 16).unwrap();
        let crit = |k: usize| {
            let s: f64 = (1..=k).map(|j| (j as f64).powi(4)).sum();
            (k as f64).powi(-4) <= 2.0 * s / (n as f64).powi(2)
        };
        assert!(crit(k));
        assert!((1..k).all(|j| !crit(j)), "n={n}: k={k} not minimal");
    }
}

#[test]
fn optimal_dimension_is_one_for_tiny_samples() {
    let cls = SmoothnessClass::ordinary(1.0, 1.0).unwrap();
    let eps = NoiseModel::mild_truncated(1.0, 16).unwrap();
    let e1 = eps.modulus(1);
    // κ* = 1 iff n² <= 2|ε_1|^{-4}
    let n_max = (2.0f64.sqrt() / (e1 * e1)).floor() as usize;
    for n in [2, n_max / 2, n_max] {
        assert_eq!(optimal_dim_est(&cls, &eps, n, 16).unwrap(), 1, "n={n}");
    }
    assert!(optimal_dim_est(&cls, &eps, n_max + 1, 16).unwrap() > 1);
}

#[test]
fn optimal_dimension_grows_like_n_to_two_ninths() {
    let cls = SmoothnessClass::ordinary(1.0, 1.0).unwrap();
    let eps = NoiseModel::mild(1.0).unwrap();
    let ns: Vec<f64> = (8..=20).map(|e| (1u64 << e) as f64).collect();
    let ks: Vec<f64> = ns
        .iter()
        .map(|&n| optimal_dim_est(&cls, &eps, n as usize, 1 << 16).unwrap() as f64)
        .collect();
    let fit = fit_rate(&ns, &ks, RateModel::Power).unwrap();
    assert!((fit.slope - 2.0 / 9.0).abs() <= 0.03, "slope {}", fit.slope);
}

#[test]
fn optimal_dimension_stops_at_vanishing_noise() {
    let cls = SmoothnessClass::ordinary(1.0, 1.0).unwrap();
    let eps = NoiseModel::mild_truncated(1.0, 4).unwrap();
    assert!(matches!(
        optimal_dim_est(&cls, &eps, 1 << 20, 100),
        Err(Error::DimensionNotFound { k_max: 4 })
    ));
}

#[test]
fn clamped_estimate_is_nonnegative() {
    let eps = NoiseModel::mild_truncated(1.0, 8).unwrap();
    let mut rng = SimRng::seed_from(34);
    for _ in 0..50 {
        let s = sample_model(&FourierDensity::uniform(0), &eps, 20, &mut rng).unwrap();
        let raw = circdeconv::estimation::estimate_q(&s, &eps, 3).unwrap();
        let c = estimate_q_clamped(&s, &eps, 3).unwrap();
        assert_eq!(c, raw.max(0.0));
    }
}

#[test]
fn estimator_rejects_degenerate_inputs() {
    let eps = NoiseModel::direct();
    let one = CircularSample::from_values(vec![0.3], "one").unwrap();
    assert!(matches!(circdeconv::estimation::estimate_q(&one, &eps, 1), Err(Error::SampleTooSmall { .. })));
    assert!(estimate_q_values(&[0.1, 0.2], &eps, 0).is_err());
    let trunc = NoiseModel::mild_truncated(1.0, 2).unwrap();
    assert!(matches!(
        estimate_q_values(&[0.1, 0.2], &trunc, 3),
        Err(Error::VanishingNoiseCoefficient { j: 3 })
    ));
}
