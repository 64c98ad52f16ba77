//! Garrote-scaled hinge loss with heredity constraints.
//!
//! Each effect `j` carries a fixed initial score column `s_ij` (for a
//! parametric effect, `Σ_c x_ic β̂_c` over its columns; for a spline effect,
//! the fitted function `f̂_j` at sample `i`) and a nonnegative scaling
//! parameter `θ_j`. The fit is the linear program
//!
//! ```text
//! minimize   Σ_i ξ_i + λ Σ_j θ_j          (or Σ_i ξ_i with Σ_j θ_j ≤ M)
//! subject to ξ_i ≥ 1 - y_i (Σ_j s_ij θ_j + β_0),  ξ ≥ 0,  θ ≥ 0
//!            θ_j ≤ θ_r  for r ∈ D_j        (strong)
//!            θ_j ≤ Σ_{r ∈ D_j} θ_r          (weak)
//! ```
//!
//! with the free intercept split into two nonnegative parts.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::heredity::{HeredityGraph, HeredityPolicy};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, SolverOptions};
use crate::svm_l1::ZERO_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `λ Σ θ` added to the objective.
    Lagrangian(f64),
    /// `Σ θ ≤ M` added as a row.
    Constraint(f64),
}

impl Penalty {
    pub fn value(&self) -> f64 {
        match *self {
            Penalty::Lagrangian(v) | Penalty::Constraint(v) => v,
        }
    }
}

/// Everything a parametric structured fit needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredFitSpec {
    /// Initial coefficients over design columns.
    pub initial: Vec<f64>,
    /// Column block of each effect; one scaling parameter per block.
    pub column_ranges: Vec<Range<usize>>,
    pub graph: HeredityGraph,
    pub penalty: Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredFitResult {
    pub intercept: f64,
    pub theta: Vec<f64>,
    /// Weights on the columns the fit was run against: `β̂_c θ_j` per design
    /// column for parametric fits, `θ_j` per score column otherwise.
    pub effective_coefficients: Vec<f64>,
    pub active_effects: Vec<usize>,
    /// LP objective at the optimum.
    pub objective: f64,
    pub training_hinge: f64,
    pub policy: HeredityPolicy,
    pub penalty: Penalty,
}

/// The compiled program and where each quantity lives in it.
#[derive(Debug, Clone)]
pub struct CompiledLp {
    pub lp: LinearProgram,
    /// LP variable of each effect's `θ`, or `None` when the effect was
    /// fixed at zero.
    pub theta_vars: Vec<Option<usize>>,
    pub slack_offset: usize,
    pub intercept_vars: (usize, usize),
    pub num_heredity_rows: usize,
}

fn check_penalty(penalty: Penalty) -> Result<()> {
    let v = penalty.value();
    if v.is_nan() || v < 0.0 {
        return Err(Error::InvalidArgument(format!("tuning value must be nonnegative, got {v}")));
    }
    if let Penalty::Lagrangian(l) = penalty {
        if l.is_infinite() {
            return Err(Error::InvalidArgument("lambda must be finite".into()));
        }
    }
    Ok(())
}

/// Effects whose score column is identically zero are fixed at `θ = 0`,
/// together with any descendant whose heredity constraint then forces zero.
fn fixed_zero_effects(scores: &DMatrix<f64>, graph: &HeredityGraph) -> Vec<bool> {
    let scale = scores.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut zero: Vec<bool> = scores
        .column_iter()
        .map(|c| c.iter().all(|v| v.abs() <= 1e-13 * scale))
        .collect();
    let order = graph
        .topological_order()
        .unwrap_or_else(|| (0..graph.num_effects()).collect());
    for j in order {
        let ps = graph.parents(j);
        if ps.is_empty() || zero[j] {
            continue;
        }
        zero[j] = match graph.policy() {
            HeredityPolicy::Strong => ps.iter().any(|&r| zero[r]),
            HeredityPolicy::Weak => ps.iter().all(|&r| zero[r]),
            HeredityPolicy::None => false,
        };
    }
    zero
}

/// Builds the structured LP over an `n × E` matrix of effect scores.
pub fn compile_scores_lp(
    scores: &DMatrix<f64>,
    labels: &[f64],
    graph: &HeredityGraph,
    penalty: Penalty,
) -> Result<CompiledLp> {
    check_penalty(penalty)?;
    let (n, e) = scores.shape();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if graph.num_effects() != e {
        return Err(Error::DimensionMismatch {
            expected: e,
            got: graph.num_effects(),
        });
    }
    if !graph.is_valid() {
        return Err(Error::InvalidArgument(graph.diagnostics().join("; ")));
    }
    let zero = fixed_zero_effects(scores, graph);
    let mut theta_vars = vec![None; e];
    let mut next = 0;
    for j in 0..e {
        if !zero[j] {
            theta_vars[j] = Some(next);
            next += 1;
        }
    }
    if next == 0 {
        return Err(Error::EmptyInitial);
    }
    let num_theta = next;
    let slack_offset = num_theta;
    let b_plus = slack_offset + n;
    let num_vars = b_plus + 2;

    let mut lp = LinearProgram::new(num_vars);
    let lambda = match penalty {
        Penalty::Lagrangian(l) => l,
        Penalty::Constraint(_) => 0.0,
    };
    let mut cost = vec![lambda; num_theta];
    cost.extend(std::iter::repeat_n(1.0, n));
    cost.extend([0.0, 0.0]);
    lp.set_objective(cost);

    for (i, &y) in labels.iter().enumerate() {
        let mut row = vec![0.0; num_vars];
        for (j, var) in theta_vars.iter().enumerate() {
            if let Some(v) = var {
                row[*v] = y * scores[(i, j)];
            }
        }
        row[slack_offset + i] = 1.0;
        row[b_plus] = y;
        row[b_plus + 1] = -y;
        lp.add_constraint(row, Relation::Ge, 1.0);
    }

    let mut num_heredity_rows = 0;
    for (j, var) in theta_vars.iter().enumerate() {
        let Some(tj) = *var else { continue };
        let kept: Vec<usize> = graph
            .parents(j)
            .iter()
            .filter_map(|&r| theta_vars[r])
            .collect();
        match graph.policy() {
            HeredityPolicy::Strong => {
                for tr in kept {
                    lp.add_sparse_constraint(&[(tj, 1.0), (tr, -1.0)], Relation::Le, 0.0);
                    num_heredity_rows += 1;
                }
            }
            HeredityPolicy::Weak if !graph.parents(j).is_empty() => {
                let mut terms = vec![(tj, 1.0)];
                terms.extend(kept.iter().map(|&tr| (tr, -1.0)));
                lp.add_sparse_constraint(&terms, Relation::Le, 0.0);
                num_heredity_rows += 1;
            }
            _ => {}
        }
    }

    if let Penalty::Constraint(m) = penalty {
        if m.is_finite() {
            let terms: Vec<(usize, f64)> = (0..num_theta).map(|v| (v, 1.0)).collect();
            lp.add_sparse_constraint(&terms, Relation::Le, m);
        }
    }

    Ok(CompiledLp {
        lp,
        theta_vars,
        slack_offset,
        intercept_vars: (b_plus, b_plus + 1),
        num_heredity_rows,
    })
}

/// Per-effect initial scores `s_ij = Σ_{c ∈ block j} x_ic β̂_c`.
pub fn parametric_scores(x: &DMatrix<f64>, initial: &[f64], ranges: &[Range<usize>]) -> Result<DMatrix<f64>> {
    if x.ncols() != initial.len() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: initial.len(),
        });
    }
    let mut s = DMatrix::zeros(x.nrows(), ranges.len());
    for (j, r) in ranges.iter().enumerate() {
        for i in 0..x.nrows() {
            s[(i, j)] = r.clone().map(|c| x[(i, c)] * initial[c]).sum();
        }
    }
    Ok(s)
}

pub fn compile_structured_lp(data: &Dataset, spec: &StructuredFitSpec) -> Result<CompiledLp> {
    let scores = parametric_scores(data.x(), &spec.initial, &spec.column_ranges)?;
    compile_scores_lp(&scores, data.y(), &spec.graph, spec.penalty)
}

/// Solves the structured LP over effect scores; `effective_coefficients`
/// equals `theta`.
pub fn fit_scores(
    scores: &DMatrix<f64>,
    labels: &[f64],
    graph: &HeredityGraph,
    penalty: Penalty,
    options: &SolverOptions,
) -> Result<StructuredFitResult> {
    let compiled = compile_scores_lp(scores, labels, graph, penalty)?;
    let sol = solve_lp(&compiled.lp, options)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::SolverStatus(sol.status));
    }
    let theta: Vec<f64> = compiled
        .theta_vars
        .iter()
        .map(|v| v.map_or(0.0, |k| sol.values[k].max(0.0)))
        .collect();
    let (bp, bm) = compiled.intercept_vars;
    let intercept = sol.values[bp] - sol.values[bm];
    let n = labels.len();
    let training_hinge = (0..n)
        .map(|i| {
            let f: f64 = (0..theta.len()).map(|j| scores[(i, j)] * theta[j]).sum();
            (1.0 - labels[i] * (f + intercept)).max(0.0)
        })
        .sum();
    let active_effects = theta
        .iter()
        .enumerate()
        .filter(|(_, t)| **t > ZERO_TOL)
        .map(|(j, _)| j)
        .collect();
    Ok(StructuredFitResult {
        intercept,
        effective_coefficients: theta.clone(),
        theta,
        active_effects,
        objective: sol.objective_value,
        training_hinge,
        policy: graph.policy(),
        penalty,
    })
}

/// Parametric structured fit (plain garrote, strong or weak heredity
/// according to `spec.graph`'s policy).
pub fn fit_structured(data: &Dataset, spec: &StructuredFitSpec) -> Result<StructuredFitResult> {
    fit_structured_with(data, spec, &SolverOptions::default())
}

pub fn fit_structured_with(
    data: &Dataset,
    spec: &StructuredFitSpec,
    options: &SolverOptions,
) -> Result<StructuredFitResult> {
    let scores = parametric_scores(data.x(), &spec.initial, &spec.column_ranges)?;
    let mut result = fit_scores(&scores, data.y(), &spec.graph, spec.penalty, options)?;
    let mut effective = vec![0.0; spec.initial.len()];
    for (j, r) in spec.column_ranges.iter().enumerate() {
        for c in r.clone() {
            effective[c] = spec.initial[c] * result.theta[j];
        }
    }
    result.effective_coefficients = effective;
    Ok(result)
}

/// Nonparametric structured fit over per-effect initial function values.
pub fn fit_nonparametric_structured(
    effect_scores: &DMatrix<f64>,
    labels: &[f64],
    graph: &HeredityGraph,
    penalty: Penalty,
) -> Result<StructuredFitResult> {
    fit_scores(effect_scores, labels, graph, penalty, &SolverOptions::default())
}

/// Smallest `λ` for which `θ = 0` is optimal: `max_j Σ_i |s_ij|`.
pub fn garrote_lambda_max(scores: &DMatrix<f64>) -> f64 {
    scores
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
