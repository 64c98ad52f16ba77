//! Test error, stratified cross-validation and heredity frequencies.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::heredity::{HeredityGraph, HeredityPolicy};
use crate::predict::sign_label;
use crate::sim::stream_rng;
use crate::svm_l1::{L1FitResult, ZERO_TOL};
use crate::svm_l2::fit_l2_svm;

/// Fraction of samples whose predicted label (ties to `+1`) differs from `y`.
pub fn generalization_error(decisions: &[f64], y: &[f64]) -> f64 {
    assert_eq!(decisions.len(), y.len(), "one decision value per label");
    if y.is_empty() {
        return 0.0;
    }
    let wrong = decisions
        .iter()
        .zip(y)
        .filter(|(d, y)| sign_label(**d) != **y)
        .count();
    wrong as f64 / y.len() as f64
}

/// Stream reserved for fold assignment.
pub const FOLD_STREAM: u64 = u64::MAX - 1;

/// Fold index per sample. Each class is shuffled and dealt round-robin, so
/// fold sizes per class differ by at most one.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, FOLD_STREAM);
    let mut fold = vec![0; y.len()];
    let mut offset = 0;
    for class in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (t, i) in idx.into_iter().enumerate() {
            fold[i] = (offset + t) % k;
        }
        offset += y.iter().filter(|&&v| v == class).count();
    }
    fold
}

/// First fold whose training part lacks a class.
fn fold_missing_class(y: &[f64], folds: &[usize], k: usize) -> Option<usize> {
    (0..k).find(|&f| {
        let mut pos = false;
        let mut neg = false;
        for (i, &v) in y.iter().enumerate() {
            if folds[i] != f {
                pos |= v > 0.0;
                neg |= v < 0.0;
            }
        }
        !(pos && neg)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub best_error: f64,
    pub best_tuning: f64,
    pub best_index: usize,
    /// Mean held-out misclassification per grid value.
    pub errors: Vec<f64>,
    /// Mean held-out hinge loss per grid value.
    pub hinge: Vec<f64>,
    pub folds: Vec<usize>,
}

/// Held-out loss that ranks grid values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvCriterion {
    /// Misclassification, ties to the smaller hinge loss.
    Misclassification,
    /// Hinge loss, ties to the smaller misclassification.
    Hinge,
}

/// Stratified `k`-fold CV over `grid`. `fit_predict(train, test_x, t)`
/// returns decision values on `test_x` for tuning value `t`. Remaining ties
/// go to the earlier grid entry.
pub fn kfold_cv<F>(
    data: &Dataset,
    grid: &[f64],
    k: usize,
    seed: u64,
    criterion: CvCriterion,
    fit_predict: F,
) -> Result<CvReport>
where
    F: Fn(&Dataset, &DMatrix<f64>, f64) -> Result<Vec<f64>>,
{
    if k < 2 || k > data.n() {
        return Err(Error::InvalidArgument(format!("fold count {k} outside 2..={}", data.n())));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty tuning grid".into()));
    }
    let y = data.y();
    let mut folds = stratified_folds(y, k, seed);
    if let Some(f) = fold_missing_class(y, &folds, k) {
        log::warn!("fold {f} leaves a class out of its training part; refolding");
        folds = stratified_folds(y, k, seed.wrapping_add(1));
        if let Some(f) = fold_missing_class(y, &folds, k) {
            return Err(Error::ClassAbsentFromFold { fold: f });
        }
    }
    let mut wrong = vec![0usize; grid.len()];
    let mut hinge = vec![0.0; grid.len()];
    for f in 0..k {
        let train_idx: Vec<usize> = (0..data.n()).filter(|&i| folds[i] != f).collect();
        let test_idx: Vec<usize> = (0..data.n()).filter(|&i| folds[i] == f).collect();
        let train = data.subset(&train_idx);
        let test = data.subset(&test_idx);
        for (g, &t) in grid.iter().enumerate() {
            let d = fit_predict(&train, test.x(), t)?;
            for (v, yi) in d.iter().zip(test.y()) {
                if sign_label(*v) != *yi {
                    wrong[g] += 1;
                }
                hinge[g] += (1.0 - yi * v).max(0.0);
            }
        }
    }
    let n = data.n() as f64;
    let errors: Vec<f64> = wrong.iter().map(|&w| w as f64 / n).collect();
    let hinge: Vec<f64> = hinge.iter().map(|h| h / n).collect();
    let mut best = 0;
    for g in 1..grid.len() {
        let better = match criterion {
            CvCriterion::Misclassification => {
                wrong[g] < wrong[best] || (wrong[g] == wrong[best] && hinge[g] < hinge[best])
            }
            CvCriterion::Hinge => hinge[g] < hinge[best] || (hinge[g] == hinge[best] && wrong[g] < wrong[best]),
        };
        if better {
            best = g;
        }
    }
    Ok(CvReport {
        best_error: errors[best],
        best_tuning: grid[best],
        best_index: best,
        errors,
        hinge,
        folds,
    })
}

/// Number of values in the initial-estimator CV grid.
pub const INITIAL_GRID_SIZE: usize = 20;
/// Folds for choosing the initial estimator's `λ`.
pub const INITIAL_FOLDS: usize = 5;

/// `λ` for the ridge-penalized initial fit by 5-fold CV over 20 log-spaced
/// values in `[1e-4, 1e4]·n/p`, ranked by held-out hinge loss. With
/// a hundred samples misclassification moves in steps of 0.01 and ties
/// often, which makes it a poor guide for the initial fit.
pub fn select_initial_lambda(data: &Dataset, seed: u64) -> Result<CvReport> {
    let grid = crate::svm_l2::initial_lambda_grid(data.n(), data.p(), INITIAL_GRID_SIZE);
    kfold_cv(data, &grid, INITIAL_FOLDS, seed, CvCriterion::Hinge, |train, test_x, lambda| {
        let fit = fit_l2_svm(train, lambda)?;
        crate::predict::LinearClassifier::decision_values(&fit, test_x)
    })
}

/// Effect-level activity of an L1 fit: an effect is active when any of its
/// columns exceeds the zero tolerance.
pub fn active_effects(coefficients: &[f64], ranges: &[Range<usize>]) -> Vec<bool> {
    ranges
        .iter()
        .map(|r| r.clone().any(|c| coefficients[c].abs() > ZERO_TOL))
        .collect()
}

/// Fraction of fits whose selected effects obey `policy`.
pub fn heredity_frequency(
    fits: &[L1FitResult],
    ranges: &[Range<usize>],
    graph: &HeredityGraph,
    policy: HeredityPolicy,
) -> f64 {
    if fits.is_empty() {
        return 0.0;
    }
    let ok = fits
        .iter()
        .filter(|f| graph.selection_complies(&active_effects(&f.coefficients, ranges), policy))
        .count();
    ok as f64 / fits.len() as f64
}

/// Mean and standard error `sd / √n` with the sample standard deviation.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
