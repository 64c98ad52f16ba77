mod common;

use heredity_svm::predict::LinearClassifier;
use heredity_svm::svm_l2::{fit_l2_svm, fit_l2_svm_svd_reduced, l2_objective};
use heredity_svm::Dataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_problem(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let s = x[(i, 0)] - 0.5 * x[(i, 1)] + 0.7 * rng.sample::<f64, _>(StandardNormal);
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    y[0] = 1.0;
    y[1] = -1.0;
    (x, y)
}

#[test]
fn one_dimensional_fit_matches_grid_search() {
    let xs = [-2.1, -1.3, -0.4, 0.2, -0.1, 0.9, 1.6, 2.4];
    let ys = [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0];
    let lambda = 1.0;
    let x = DMatrix::from_column_slice(8, 1, &xs);
    let fit = fit_l2_svm(&Dataset::new(x.clone(), ys.to_vec()).unwrap(), lambda).unwrap();

    let steps = 10_000;
    let mut best = f64::INFINITY;
    for a in 0..=steps {
        let beta = -5.0 + 10.0 * a as f64 / steps as f64;
        let pen = lambda * beta * beta;
        if pen >= best {
            continue;
        }
        for b in 0..=steps {
            let b0 = -5.0 + 10.0 * b as f64 / steps as f64;
            let h: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(xi, yi)| (1.0 - yi * (xi * beta + b0)).max(0.0))
                .sum();
            best = best.min(h + pen);
        }
    }
    assert!(fit.objective <= best + 1e-12, "{} vs grid {best}", fit.objective);
    assert!(best - fit.objective < 1e-3, "{} vs grid {best}", fit.objective);
}

#[test]
fn reduced_and_direct_fits_agree() {
    for (k, &p) in [20usize, 50].iter().cycle().take(20).enumerate() {
        let (x, y) = random_problem(10, p, 100 + k as u64);
        for lambda in [0.05, 1.0] {
            let direct = fit_l2_svm(&Dataset::new(x.clone(), y.clone()).unwrap(), lambda).unwrap();
            let reduced = fit_l2_svm_svd_reduced(&x, &y, lambda).unwrap();
            assert!(
                (direct.objective - reduced.objective).abs() < 1e-6,
                "p={p} λ={lambda}: {} vs {}",
                direct.objective,
                reduced.objective
            );
            let dd = direct.decision_values(&x).unwrap();
            let dr = reduced.decision_values(&x).unwrap();
            for (a, b) in dd.iter().zip(&dr) {
                assert!((a - b).abs() < 1e-6, "p={p} λ={lambda}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn square_design_reduction_is_exact() {
    let (x, y) = random_problem(12, 12, 7);
    let direct = fit_l2_svm(&Dataset::new(x.clone(), y.clone()).unwrap(), 0.3).unwrap();
    let reduced = fit_l2_svm_svd_reduced(&x, &y, 0.3).unwrap();
    let dd = direct.decision_values(&x).unwrap();
    let dr = reduced.decision_values(&x).unwrap();
    for (a, b) in dd.iter().zip(&dr) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn wide_random_design_objectives_agree() {
    let (x, y) = random_problem(10, 30, 31);
    let direct = fit_l2_svm(&Dataset::new(x.clone(), y.clone()).unwrap(), 0.5).unwrap();
    let reduced = fit_l2_svm_svd_reduced(&x, &y, 0.5).unwrap();
    assert!((direct.objective - reduced.objective).abs() < 1e-6);
    let recomputed = l2_objective(&x, &y, &reduced.coefficients, reduced.intercept, 0.5);
    assert!((recomputed - reduced.objective).abs() < 1e-12);
}

#[test]
fn zero_design_gives_intercept_only_classifier() {
    let x = DMatrix::zeros(6, 40);
    let y = vec![1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
    let fit = fit_l2_svm_svd_reduced(&x, &y, 1.0).unwrap();
    assert!(fit.coefficients.iter().all(|&a| a == 0.0));
    assert_eq!(fit.intercept, 1.0);
    assert_eq!(fit.objective, 4.0);
}

#[test]
fn coefficient_norm_shrinks_with_lambda() {
    let (x, y) = random_problem(40, 8, 5);
    let d = Dataset::new(x, y).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..25 {
        let lambda = 10f64.powf(-3.0 + 0.25 * k as f64);
        let fit = fit_l2_svm(&d, lambda).unwrap();
        let norm = fit.coefficients.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(norm <= prev + 1e-8, "λ={lambda}: {norm} > {prev}");
        prev = norm;
    }
}

/// No random perturbation of the returned point does better.
#[test]
fn returned_point_is_locally_optimal() {
    let (x, y) = random_problem(30, 6, 9);
    let lambda = 0.2;
    let fit = fit_l2_svm(&Dataset::new(x.clone(), y.clone()).unwrap(), lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for scale in [1e-1, 1e-3, 1e-5] {
        for _ in 0..200 {
            let beta: Vec<f64> = fit
                .coefficients
                .iter()
                .map(|b| b + scale * rng.random_range(-1.0..1.0))
                .collect();
            let b0 = fit.intercept + scale * rng.random_range(-1.0..1.0);
            let obj = l2_objective(&x, &y, &beta, b0, lambda);
            assert!(obj >= fit.objective * (1.0 - 1e-9) - 1e-12);
        }
    }
}

#[test]
fn intercept_is_exact_for_fixed_coefficients() {
    let (x, y) = random_problem(25, 4, 12);
    let fit = fit_l2_svm(&Dataset::new(x.clone(), y.clone()).unwrap(), 0.7).unwrap();
    let f: Vec<f64> = (0..25)
        .map(|i| (0..4).map(|j| x[(i, j)] * fit.coefficients[j]).sum())
        .collect();
    let oracle = common::hinge_min_over_intercept(&f, &y);
    let ours: f64 = f
        .iter()
        .zip(&y)
        .map(|(fi, yi)| (1.0 - yi * (fi + fit.intercept)).max(0.0))
        .sum();
    assert!((ours - oracle).abs() < 1e-12);
}
