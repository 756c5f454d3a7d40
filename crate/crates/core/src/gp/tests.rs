use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::*;
use crate::kernels::{Hyperparameters, KernelEvaluator, KernelMode};
use crate::spectral::{circle_eigensystem, sphere_eigensystem, EigenSystem};

fn circle(levels: usize) -> Arc<dyn EigenSystem> {
    Arc::new(circle_eigensystem(levels).unwrap())
}

fn pts(xs: &[f64]) -> Vec<ManifoldPoint> {
    xs.iter().map(|&x| ManifoldPoint::circle(x).unwrap()).collect()
}

fn matern(sigma2: f64, kappa: f64, nu: f64, levels: usize) -> KernelEvaluator {
    KernelEvaluator::spectral(Hyperparameters::matern(sigma2, kappa, nu).unwrap(), circle(levels)).unwrap()
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn empirical_cov(samples: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let m = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; m];
    for s in samples {
        for (a, b) in mean.iter_mut().zip(s) {
            *a += b / n;
        }
    }
    let mut c = DMatrix::zeros(m, m);
    for s in samples {
        for i in 0..m {
            for j in 0..m {
                c[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    (mean, c)
}

#[test]
fn dataset_validation() {
    assert!(Dataset::new(pts(&[0.1, 0.2]), vec![1.0], 0.0).is_err());
    assert!(Dataset::new(pts(&[0.1]), vec![1.0], -1.0).is_err());
    assert!(Dataset::new(pts(&[0.1]), vec![f64::NAN], 0.0).is_err());
    let mixed = vec![ManifoldPoint::circle(0.1).unwrap(), ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap()];
    assert!(matches!(Dataset::new(mixed, vec![0.0, 0.0], 0.0), Err(Error::ManifoldMismatch { .. })));
}

#[test]
fn single_point_interpolates() {
    let ke = matern(1.0, 0.3, 1.5, 64);
    let data = Dataset::new(pts(&[0.4]), vec![2.5], 0.0).unwrap();
    let post = fit(&ke, &data).unwrap();
    let p = post.predict(data.points(), false).unwrap();
    assert!((p.mean[0] - 2.5).abs() < 1e-12);
    assert_eq!(post.jitter(), 0.0);
}

#[test]
fn noiseless_interpolation_matches_direct_solve() {
    let ke = matern(1.0, 0.2, 1.5, 128);
    let x = pts(&[0.03, 0.11, 0.2, 0.32, 0.41, 0.5, 0.58, 0.71, 0.83, 0.95]);
    let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
    let data = Dataset::new(x.clone(), y.clone(), 0.0).unwrap();
    let post = fit(&ke, &data).unwrap();

    let k = ke.gram_sym(&x).unwrap();
    let alpha = k.clone().lu().solve(&DVector::from_vec(y.clone())).unwrap();
    assert!((post.alpha() - &alpha).amax() <= 1e-8 * alpha.amax());

    let p = post.predict(&x, true).unwrap();
    for (m, t) in p.mean.iter().zip(&y) {
        assert!((m - t).abs() < 1e-6);
    }
    assert!(p.variance.iter().all(|v| *v <= 1e-8));

    let l = post.factor();
    let mut target = k;
    for i in 0..10 {
        target[(i, i)] += post.jitter();
    }
    assert!(rel_frobenius(&(&l * l.transpose()), &target) < 1e-10);
}

#[test]
fn duplicates_without_noise_are_rejected() {
    let ke = matern(1.0, 0.2, 1.5, 64);
    let data = Dataset::new(pts(&[0.1, 0.5, 0.1]), vec![0.0, 1.0, 0.0], 0.0).unwrap();
    let err = fit(&ke, &data).unwrap_err();
    assert!(err.to_string().contains("numerically indefinite"), "{err}");
    // with noise the same data is fine
    assert!(fit(&ke, &data.with_noise_variance(1e-3).unwrap()).is_ok());
}

#[test]
fn near_duplicates_use_jitter() {
    let ke = matern(1.0, 0.5, 2.5, 64);
    let x = pts(&[0.1, 0.1 + 1e-9, 0.6]);
    let data = Dataset::new(x.clone(), vec![0.0, 0.0, 1.0], 0.0).unwrap();
    let post = fit(&ke, &data).unwrap();
    assert!(post.jitter() > 0.0);
    let l = post.factor();
    let mut target = ke.gram_sym(&x).unwrap();
    for i in 0..3 {
        target[(i, i)] += post.jitter();
    }
    assert!(rel_frobenius(&(&l * l.transpose()), &target) < 1e-10);
}

#[test]
fn far_points_revert_to_the_prior() {
    let ke = matern(1.3, 0.01, 1.5, 1024);
    let x = pts(&[0.0, 0.02, 0.04, 0.06]);
    let data = Dataset::new(x, vec![1.0, -0.5, 0.8, 0.3], 1e-4).unwrap();
    let post = fit(&ke, &data).unwrap();
    let far = pts(&[0.53]);
    let p = post.predict(&far, false).unwrap();
    let prior = ke.diag(&far).unwrap()[0];
    assert!(p.mean[0].abs() < 1e-6, "{}", p.mean[0]);
    assert!((p.variance[0] - prior).abs() < 1e-6 * prior);
}

#[test]
fn predict_rejects_other_manifolds() {
    let ke = matern(1.0, 0.2, 1.5, 32);
    let post = fit(&ke, &Dataset::new(pts(&[0.2]), vec![1.0], 0.1).unwrap()).unwrap();
    let s = vec![ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap()];
    assert!(matches!(post.predict(&s, false), Err(Error::ManifoldMismatch { .. })));
}

#[test]
fn posterior_variance_never_exceeds_prior() {
    let ke = matern(0.7, 0.15, 2.5, 128);
    let mut rng = rng_for(11, 0);
    let x: Vec<f64> = (0..25).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = x.iter().map(|v| (6.0 * v).cos()).collect();
    let post = fit(&ke, &Dataset::new(pts(&x), y, 1e-3).unwrap()).unwrap();
    let xs = pts(&(0..200).map(|i| i as f64 / 200.0).collect::<Vec<_>>());
    let p = post.predict(&xs, true).unwrap();
    let prior = ke.diag(&xs).unwrap();
    for (v, k) in p.variance.iter().zip(&prior) {
        assert!(*v <= k + 1e-8);
    }
    let cov = p.covariance.unwrap();
    assert_eq!(cov, cov.transpose());
}

#[test]
fn evidence_of_a_single_zero_observation() {
    let sigma2 = 1.7;
    let h = Hyperparameters::matern(sigma2, 0.3, 1.5).unwrap();
    let data = Dataset::new(pts(&[0.25]), vec![0.0], 0.0).unwrap();
    let got = log_marginal_likelihood(&h, circle(256), &data).unwrap();
    let want = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn evidence_matches_dense_gaussian_density() {
    let h = Hyperparameters::matern(0.9, 0.25, 2.5).unwrap();
    let es = circle(128);
    let x = pts(&[0.05, 0.3, 0.35, 0.6, 0.9]);
    let y = vec![0.3, -0.2, 0.1, 1.1, -0.7];
    let noise = 0.05;
    let data = Dataset::new(x.clone(), y.clone(), noise).unwrap();
    let got = log_marginal_likelihood(&h, es.clone(), &data).unwrap();

    let ke = KernelEvaluator::spectral(h, es).unwrap();
    let mut k = ke.gram_sym(&x).unwrap();
    for i in 0..5 {
        k[(i, i)] += noise;
    }
    let yv = DVector::from_vec(y);
    let lu = k.clone().lu();
    let quad = yv.dot(&lu.solve(&yv).unwrap());
    let want = -0.5 * quad - 0.5 * lu.determinant().ln() - 2.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");

    let post = fit(&ke, &data).unwrap();
    assert!((post.log_marginal_likelihood() - want).abs() < 1e-10);
}

#[test]
fn evidence_rises_with_noise_towards_the_true_level() {
    let mut rng = rng_for(5, 0);
    let true_noise: f64 = 0.25;
    let n = 300;
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = (0..n).map(|_| true_noise.sqrt() * super::sampling_normal(&mut rng)).collect();
    let h = Hyperparameters::matern(1e-8, 0.2, 1.5).unwrap();
    let es = circle(64);
    let data = Dataset::new(pts(&x), y.clone(), 0.01).unwrap();
    let ke = KernelEvaluator::spectral(h, es).unwrap();
    let obj = EvidenceObjective::new(&ke, &data).unwrap();
    let ms = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let grid: Vec<f64> = (1..=40).map(|i| ms * i as f64 / 40.0).collect();
    let ev: Vec<f64> = grid.iter().map(|s| obj.evaluate(&h, *s).unwrap()).collect();
    assert!(ev.windows(2).all(|w| w[1] > w[0]));
    let beyond = obj.evaluate(&h, 1.5 * ms).unwrap();
    assert!(beyond < ev[39]);
    assert!((ms - true_noise).abs() < 0.1 * true_noise);
}

#[test]
fn optimizer_contracts() {
    let ke = matern(1.0, 0.5, 1.5, 128);
    let x = pts(&[0.05, 0.21, 0.3, 0.47, 0.66, 0.8]);
    let data = Dataset::new(x, vec![0.4, -0.1, 0.3, 1.0, -0.6, 0.2], 0.01).unwrap();
    let all = FixedParameters {
        sigma2: true,
        kappa: true,
        noise: true,
    };
    let r = optimize_with_evaluator(&ke, &data, all, 50).unwrap();
    assert_eq!(r.gradient_evaluations, 0);
    assert_eq!(r.hypers, *ke.hyperparameters());
    assert_eq!(r.noise_variance, 0.01);

    let r = optimize_with_evaluator(&ke, &data, FixedParameters::default(), 40).unwrap();
    assert!(r.log_evidence >= r.initial_log_evidence - 1e-12);
    assert!(r.log_evidence > r.initial_log_evidence);

    let only_kappa = FixedParameters {
        sigma2: true,
        kappa: false,
        noise: true,
    };
    let r = optimize_with_evaluator(&ke, &data, only_kappa, 10).unwrap();
    assert_eq!(r.hypers.sigma2, 1.0);
    assert_eq!(r.noise_variance, 0.01);
}

#[test]
fn finite_difference_gradients_agree() {
    let ke = matern(1.0, 0.3, 1.5, 128);
    let mut rng = rng_for(3, 0);
    let x: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = x.iter().map(|v| (5.0 * v).sin()).collect();
    let data = Dataset::new(pts(&x), y, 0.02).unwrap();
    let obj = EvidenceObjective::new(&ke, &data).unwrap();
    let theta = [0.3f64.ln(), 0.45f64.ln(), 0.05f64.ln()];
    let g5 = obj.gradient(&theta, FixedParameters::default(), 1e-5).unwrap();
    let g6 = obj.gradient(&theta, FixedParameters::default(), 1e-6).unwrap();
    for (a, b) in g5.iter().zip(&g6) {
        assert!((a - b).abs() <= 1e-3 * b.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn cached_evidence_matches_fresh_evaluator() {
    let ke = matern(1.0, 0.3, 1.5, 100);
    let data = Dataset::new(pts(&[0.1, 0.4, 0.45, 0.8]), vec![1.0, 0.0, 0.2, -1.0], 0.03).unwrap();
    let obj = EvidenceObjective::new(&ke, &data).unwrap();
    let h2 = Hyperparameters::matern(2.0, 0.1, 1.5).unwrap();
    let cached = obj.evaluate(&h2, 0.1).unwrap();
    let fresh = fit(&ke.with_hyperparameters(h2).unwrap(), &data.with_noise_variance(0.1).unwrap())
        .unwrap()
        .log_marginal_likelihood();
    assert!((cached - fresh).abs() < 1e-12);

    let closed = KernelEvaluator::new(*ke.hyperparameters(), circle(100), KernelMode::CircleClosedForm).unwrap();
    let obj = EvidenceObjective::new(&closed, &data).unwrap();
    let direct = fit(&closed, &data).unwrap().log_marginal_likelihood();
    assert!((obj.evaluate(closed.hyperparameters(), 0.03).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn recovers_lengthscale_from_synthetic_data() {
    let es = circle(256);
    let truth = Hyperparameters::matern(1.0, 0.2, 1.5).unwrap();
    let mut rng = rng_for(0, 0);
    let x: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
    let p = pts(&x);
    let f = sample_prior_deterministic(&truth, es.clone(), 0, &p).unwrap();
    let noise: f64 = 1e-4;
    let mut rng = rng_for(0, 1);
    let y: Vec<f64> = f.iter().map(|v| v + noise.sqrt() * super::sampling_normal(&mut rng)).collect();
    let data = Dataset::new(p, y, noise).unwrap();
    let init = Hyperparameters::matern(0.5, 0.5, 1.5).unwrap();
    let fixed = FixedParameters {
        noise: true,
        ..Default::default()
    };
    let r = optimize_hyperparameters(es, &data, init, fixed, 1000).unwrap();
    assert!(r.converged);
    assert!((0.1..=0.4).contains(&r.hypers.kappa), "{r:?}");
    assert!((0.5..=2.0).contains(&r.hypers.sigma2), "{r:?}");
}

#[test]
fn deterministic_prior_moments() {
    let h = Hyperparameters::matern(1.0, 0.25, 1.5).unwrap();
    let es = circle(64);
    let ke = KernelEvaluator::spectral(h, es.clone()).unwrap();
    let xs = pts(&(0..20).map(|i| i as f64 / 20.0 + 0.013).collect::<Vec<_>>());
    let a = sample_prior_deterministic(&h, es.clone(), 9, &xs).unwrap();
    let b = sample_prior_deterministic(&h, es.clone(), 9, &xs).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_prior_deterministic(&h, es.clone(), 10, &xs).unwrap());

    let samples: Vec<Vec<f64>> = (0..4000)
        .map(|s| sample_prior_deterministic(&h, es.clone(), s, &xs).unwrap())
        .collect();
    let (mean, cov) = empirical_cov(&samples);
    let k = ke.gram_sym(&xs).unwrap();
    assert!(rel_frobenius(&cov, &k) < 0.10);
    let bound = 4.0 * (h.sigma2 / 4000.0).sqrt();
    assert!(mean.iter().all(|m| m.abs() <= bound));
}

#[test]
fn random_feature_prior_covariance() {
    let h = Hyperparameters::matern(1.0, 0.3, 1.5).unwrap();
    let es = circle(64);
    let ke = KernelEvaluator::spectral(h, es.clone()).unwrap();
    let xs = pts(&(0..10).map(|i| i as f64 / 10.0).collect::<Vec<_>>());
    let a = sample_prior_random_features(&h, es.clone(), 5000, 4, &xs).unwrap();
    assert_eq!(a, sample_prior_random_features(&h, es.clone(), 5000, 4, &xs).unwrap());
    let samples: Vec<Vec<f64>> = (0..2000)
        .map(|s| sample_prior_random_features(&h, es.clone(), 5000, s, &xs).unwrap())
        .collect();
    let (_, cov) = empirical_cov(&samples);
    let k = ke.gram_sym(&xs).unwrap();
    assert!(rel_frobenius(&cov, &k) < 0.15);
}

#[test]
fn random_features_on_the_sphere_match_the_kernel_scale() {
    // vol ≠ 1: the level distribution must be rescaled to keep k(x, x) = σ²
    let h = Hyperparameters::matern(2.0, 0.8, 1.5).unwrap();
    let es: Arc<dyn EigenSystem> = Arc::new(sphere_eigensystem(2, 12).unwrap());
    let ke = KernelEvaluator::spectral(h, es.clone()).unwrap();
    let x = vec![ManifoldPoint::sphere(&[0.3, -0.2, 0.9]).unwrap()];
    let k = ke.diag(&x).unwrap()[0];
    let n = 3000;
    let var = (0..n)
        .map(|s| sample_prior_random_features(&h, es.clone(), 200, s, &x).unwrap()[0].powi(2))
        .sum::<f64>()
        / n as f64;
    assert!((var - k).abs() < 0.1 * k, "{var} vs {k}");
}

#[test]
fn single_level_gives_constant_field() {
    let h = Hyperparameters::squared_exponential(1.0, 1e3).unwrap();
    let es = circle(16);
    let xs = pts(&[0.0, 0.2, 0.5, 0.77]);
    let v = sample_prior_random_features(&h, es, 50, 1, &xs).unwrap();
    assert!(v.iter().all(|a| (a - v[0]).abs() < 1e-12));
    assert!(v[0] != 0.0);
}

#[test]
fn sampling_needs_member_eigenfunctions() {
    let h = Hyperparameters::matern(1.0, 0.5, 1.5).unwrap();
    let es: Arc<dyn EigenSystem> = Arc::new(sphere_eigensystem(3, 5).unwrap());
    let x = vec![ManifoldPoint::sphere(&[1.0, 0.0, 0.0, 0.0]).unwrap()];
    assert!(matches!(sample_prior_deterministic(&h, es, 0, &x), Err(Error::Unsupported(_))));
}

#[test]
fn pathwise_noiseless_reproduces_data() {
    let ke = matern(1.0, 0.2, 1.5, 64);
    let x = pts(&[0.1, 0.35, 0.6, 0.85]);
    let y = vec![1.0, -1.0, 0.5, 0.0];
    let post = fit(&ke, &Dataset::new(x.clone(), y.clone(), 0.0).unwrap()).unwrap();
    for sampler in [PriorSampler::Deterministic, PriorSampler::RandomFeatures { num_features: 300 }] {
        let s = sample_posterior_pathwise(&post, sampler, 17, &x).unwrap();
        for (a, b) in s.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn pathwise_moments_match_the_analytic_posterior() {
    let ke = matern(1.0, 0.25, 1.5, 64);
    let x = pts(&[0.05, 0.18, 0.33, 0.4, 0.52, 0.7, 0.74, 0.9]);
    let y = vec![0.5, 0.9, -0.3, -0.6, 0.1, 1.2, 1.0, -0.2];
    let post = fit(&ke, &Dataset::new(x, y, 0.01).unwrap()).unwrap();
    let xs = pts(&(0..20).map(|i| i as f64 / 20.0 + 0.021).collect::<Vec<_>>());
    let pred = post.predict(&xs, true).unwrap();
    let samples = sample_posterior_paths(&post, PriorSampler::Deterministic, 77, 4000, &xs).unwrap();
    let (mean, cov) = empirical_cov(&samples);
    let maxvar = pred.variance.iter().copied().fold(0.0, f64::max);
    let bound = 4.0 * (maxvar / 4000.0).sqrt();
    for (m, p) in mean.iter().zip(&pred.mean) {
        assert!((m - p).abs() <= bound, "{m} vs {p}");
    }
    assert!(rel_frobenius(&cov, pred.covariance.as_ref().unwrap()) < 0.10);

    let again = sample_posterior_paths(&post, PriorSampler::Deterministic, 77, 3, &xs).unwrap();
    assert_eq!(again[..], samples[..3]);
    assert_eq!(sample_posterior_pathwise(&post, PriorSampler::Deterministic, 77, &xs).unwrap(), samples[0]);
}

