//! Dense linear programming.
//!
//! Programs are stated as `minimize c·v` subject to a list of linear rows,
//! each with relation `≤`, `≥` or `=`, and a per-variable sign restriction
//! (nonnegative or free). [`solve_lp`] converts to standard form and runs a
//! two-phase revised simplex with an explicit dense basis inverse.

mod simplex;

use serde::{Deserialize, Serialize};

pub use simplex::solve_lp;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    MalformedProgram(String),
    #[error("pivot limit of {0} exceeded")]
    MaxPivotsExceeded(usize),
    #[error("basis matrix became singular during refactorization")]
    SingularBasis,
    #[error("value vector has {got} entries, program has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    nonneg: Vec<bool>,
}

impl LinearProgram {
    /// A program over `num_vars` nonnegative variables with zero objective
    /// and no rows.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            nonneg: vec![true; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn nonneg_mask(&self) -> &[bool] {
        &self.nonneg
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) {
        self.objective = objective;
    }

    pub fn set_objective_coeff(&mut self, var: usize, value: f64) {
        self.objective[var] = value;
    }

    pub fn set_free(&mut self, var: usize) {
        self.nonneg[var] = false;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Adds a row given as `(variable, coefficient)` pairs.
    pub fn add_sparse_constraint(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars];
        for &(var, c) in terms {
            coeffs[var] += c;
        }
        self.add_constraint(coeffs, relation, rhs);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::MalformedProgram(format!(
                "objective has {} entries, expected {}",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.nonneg.len() != self.num_vars {
            return Err(LpError::MalformedProgram(format!(
                "sign mask has {} entries, expected {}",
                self.nonneg.len(),
                self.num_vars
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::MalformedProgram(
                "non-finite objective coefficient".into(),
            ));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != self.num_vars {
                return Err(LpError::MalformedProgram(format!(
                    "constraint {i} has {} coefficients, expected {}",
                    row.coeffs.len(),
                    self.num_vars
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(LpError::MalformedProgram(format!(
                    "constraint {i} has a non-finite coefficient"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables throughout.
    Bland,
    /// Most negative reduced cost (smallest index on ties); falls back to
    /// Bland's rule during long runs of degenerate pivots.
    DantzigBlandFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_pivots: usize,
    pub refactor_every: usize,
    pub pivot_rule: PivotRule,
    /// Consecutive degenerate pivots tolerated before switching to Bland's
    /// rule (only used by [`PivotRule::DantzigBlandFallback`]).
    pub degenerate_streak_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_pivots: 200_000,
            refactor_every: 64,
            pivot_rule: PivotRule::DantzigBlandFallback,
            degenerate_streak_limit: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Optimality residuals computed from the final basis in standard form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Certificate {
    /// `max(0, -min_j d_j)` over reduced costs of non-artificial columns.
    pub dual_infeasibility: f64,
    /// `max_j |x_j d_j|`.
    pub complementary_slackness: f64,
    /// Largest violation of `A x = b, x ≥ 0` in standard form.
    pub primal_infeasibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// `|c·x - y·b|` for the final primal/dual pair.
    pub duality_gap_bound: f64,
    pub certificate: Certificate,
    pub pivots: usize,
}

/// True iff `values` satisfies every row and sign restriction within `tol`.
pub fn check_feasible(lp: &LinearProgram, values: &[f64], tol: f64) -> Result<bool, LpError> {
    if values.len() != lp.num_vars {
        return Err(LpError::DimensionMismatch {
            expected: lp.num_vars,
            got: values.len(),
        });
    }
    if values
        .iter()
        .zip(&lp.nonneg)
        .any(|(&v, &nonneg)| !v.is_finite() || (nonneg && v < -tol))
    {
        return Ok(false);
    }
    Ok(lp.constraints.iter().all(|row| {
        let lhs: f64 = row.coeffs.iter().zip(values).map(|(a, v)| a * v).sum();
        match row.relation {
            Relation::Le => lhs <= row.rhs + tol,
            Relation::Ge => lhs >= row.rhs - tol,
            Relation::Eq => (lhs - row.rhs).abs() <= tol,
        }
    }))
}

pub fn objective_at(lp: &LinearProgram, values: &[f64]) -> f64 {
    lp.objective.iter().zip(values).map(|(c, v)| c * v).sum()
}
