//! Lasso-penalized hinge loss, solved exactly as a linear program.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, SolverOptions};

/// Coefficients at or below this magnitude are reported inactive.
pub const ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1FitResult {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub active_set: Vec<usize>,
    pub objective: f64,
}

/// Variables `[β⁺ (p), β⁻ (p), ξ (n), β_0⁺, β_0⁻]`; one row
/// `ξ_i + y_i x_i·(β⁺ - β⁻) + y_i(β_0⁺ - β_0⁻) ≥ 1` per sample.
pub fn compile_l1_lp(data: &Dataset, lambda: f64) -> LinearProgram {
    let (n, p) = (data.n(), data.p());
    let num_vars = 2 * p + n + 2;
    let mut lp = LinearProgram::new(num_vars);
    let mut cost = vec![lambda; 2 * p];
    cost.extend(std::iter::repeat_n(1.0, n));
    cost.extend([0.0, 0.0]);
    lp.set_objective(cost);
    let x = data.x();
    for (i, &y) in data.y().iter().enumerate() {
        let mut row = vec![0.0; num_vars];
        for j in 0..p {
            row[j] = y * x[(i, j)];
            row[p + j] = -y * x[(i, j)];
        }
        row[2 * p + i] = 1.0;
        row[2 * p + n] = y;
        row[2 * p + n + 1] = -y;
        lp.add_constraint(row, Relation::Ge, 1.0);
    }
    lp
}

/// Minimizes `Σ_i [1 - y_i(x_i·β + β_0)]_+ + λ‖β‖₁` at an LP vertex.
pub fn fit_l1_svm(data: &Dataset, lambda: f64) -> Result<L1FitResult> {
    fit_l1_svm_with(data, lambda, &SolverOptions::default())
}

pub fn fit_l1_svm_with(data: &Dataset, lambda: f64, options: &SolverOptions) -> Result<L1FitResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    let (n, p) = (data.n(), data.p());
    let lp = compile_l1_lp(data, lambda);
    let sol = solve_lp(&lp, options)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::SolverStatus(sol.status));
    }
    let coefficients: Vec<f64> = (0..p).map(|j| sol.values[j] - sol.values[p + j]).collect();
    let intercept = sol.values[2 * p + n] - sol.values[2 * p + n + 1];
    let active_set = coefficients
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > ZERO_TOL)
        .map(|(j, _)| j)
        .collect();
    Ok(L1FitResult {
        intercept,
        coefficients,
        lambda,
        active_set,
        objective: sol.objective_value,
    })
}

/// Smallest `λ` at which `β = 0` is guaranteed optimal: each hinge
/// subgradient is bounded by `|x_ij|`.
pub fn lambda_max(data: &Dataset) -> f64 {
    data.x()
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn separable() -> Dataset {
        let x = DMatrix::from_row_slice(6, 2, &[
            2.0, 1.0, 1.5, -0.5, 1.0, 0.3, -1.0, 0.2, -2.0, -1.0, -0.7, 0.9,
        ]);
        Dataset::new(x, vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0]).unwrap()
    }

    #[test]
    fn unpenalized_separable_data_reaches_zero_hinge() {
        let fit = fit_l1_svm(&separable(), 0.0).unwrap();
        assert!(fit.objective.abs() < 1e-9);
        let x = separable();
        for i in 0..6 {
            let f: f64 = (0..2).map(|j| x.x()[(i, j)] * fit.coefficients[j]).sum::<f64>() + fit.intercept;
            assert!(x.y()[i] * f >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn huge_penalty_leaves_majority_intercept() {
        let x = DMatrix::from_row_slice(5, 1, &[0.3, -1.2, 0.8, 2.0, -0.4]);
        let d = Dataset::new(x, vec![1.0, 1.0, 1.0, -1.0, -1.0]).unwrap();
        let lambda = 2.0 * lambda_max(&d);
        let fit = fit_l1_svm(&d, lambda).unwrap();
        assert!(fit.active_set.is_empty());
        assert_eq!(fit.coefficients, vec![0.0]);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn inactive_coefficients_are_exact_zeros() {
        let d = separable();
        for lambda in [0.05, 0.3, 1.0, 3.0] {
            let fit = fit_l1_svm(&d, lambda).unwrap();
            for b in &fit.coefficients {
                assert!(*b == 0.0 || b.abs() > 1e-8);
            }
        }
    }
}
