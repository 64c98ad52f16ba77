//! Decision values and labels for every fitted classifier.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splines::NonparametricInitial;
use crate::structured::StructuredFitResult;
use crate::svm_l1::L1FitResult;
use crate::svm_l2::L2FitResult;

/// Label for a decision value; an exact zero goes to `+1`.
pub fn sign_label(decision: f64) -> f64 {
    if decision >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// A classifier of the form `sign(b + x·w)` over some design.
pub trait LinearClassifier {
    fn intercept(&self) -> f64;
    fn weights(&self) -> &[f64];

    fn decision_value(&self, row: &[f64]) -> Result<f64> {
        let w = self.weights();
        if row.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: row.len(),
            });
        }
        Ok(self.intercept() + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
    }

    fn decision_values(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let w = self.weights();
        if x.ncols() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: x.ncols(),
            });
        }
        let b = self.intercept();
        Ok((0..x.nrows())
            .map(|i| b + w.iter().enumerate().map(|(j, wj)| x[(i, j)] * wj).sum::<f64>())
            .collect())
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.decision_values(x)?.into_iter().map(sign_label).collect())
    }
}

impl LinearClassifier for L2FitResult {
    fn intercept(&self) -> f64 {
        self.intercept
    }
    fn weights(&self) -> &[f64] {
        &self.coefficients
    }
}

impl LinearClassifier for L1FitResult {
    fn intercept(&self) -> f64 {
        self.intercept
    }
    fn weights(&self) -> &[f64] {
        &self.coefficients
    }
}

impl LinearClassifier for StructuredFitResult {
    fn intercept(&self) -> f64 {
        self.intercept
    }
    fn weights(&self) -> &[f64] {
        &self.effective_coefficients
    }
}

/// Hand-assembled linear rule, e.g. a known true model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LinearClassifier for LinearModel {
    fn intercept(&self) -> f64 {
        self.intercept
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `b + Σ_e θ_e f̂_e(z)` written as one linear rule over the spline design:
/// every basis column of effect `e` is weighted `θ_e α̂_c`.
pub fn nonparametric_model(initial: &NonparametricInitial, theta: &[f64], intercept: f64) -> Result<LinearModel> {
    let blocks = initial.design.blocks();
    if theta.len() != blocks.len() {
        return Err(Error::DimensionMismatch {
            expected: blocks.len(),
            got: theta.len(),
        });
    }
    let mut weights = vec![0.0; initial.alpha.len()];
    for (range, t) in blocks.iter().zip(theta) {
        for c in range.clone() {
            weights[c] = t * initial.alpha[c];
        }
    }
    Ok(LinearModel { intercept, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_to_positive() {
        let m = LinearModel {
            intercept: 0.0,
            weights: vec![1.0, -1.0],
        };
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        assert_eq!(m.predict(&x).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn zero_theta_positive_intercept_predicts_all_positive() {
        let r = StructuredFitResult {
            intercept: 0.3,
            theta: vec![0.0, 0.0],
            effective_coefficients: vec![0.0, 0.0, 0.0],
            active_effects: vec![],
            objective: 0.0,
            training_hinge: 0.0,
            policy: crate::heredity::HeredityPolicy::Strong,
            penalty: crate::structured::Penalty::Lagrangian(1.0),
        };
        let x = DMatrix::from_fn(5, 3, |i, j| (i as f64 - 2.0) * (j as f64 + 1.0));
        assert!(r.predict(&x).unwrap().iter().all(|&l| l == 1.0));
    }

    #[test]
    fn width_mismatch_is_reported() {
        let m = LinearModel {
            intercept: 0.0,
            weights: vec![1.0],
        };
        assert!(m.decision_values(&DMatrix::zeros(2, 3)).is_err());
    }
}
