use nalgebra::DMatrix;

use super::{
    Certificate, LinearProgram, LpError, LpSolution, LpStatus, PivotRule, Relation, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    /// Original variable `var`, entering with sign `+1` or `-1` (free split).
    Structural { var: usize, sign: f64 },
    Slack,
    Artificial,
}

/// `min cost·x  s.t.  A x = b, x ≥ 0`, with `b ≥ 0`.
struct StandardForm {
    m: usize,
    /// Column-major, `columns[j * m + i]`.
    columns: Vec<f64>,
    kinds: Vec<Column>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    initial_basis: Vec<usize>,
}

impl StandardForm {
    fn num_cols(&self) -> usize {
        self.kinds.len()
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.m..(j + 1) * self.m]
    }

    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let mut kinds = Vec::new();
        let mut cost = Vec::new();
        for (var, &nonneg) in lp.nonneg.iter().enumerate() {
            kinds.push(Column::Structural { var, sign: 1.0 });
            cost.push(lp.objective[var]);
            if !nonneg {
                kinds.push(Column::Structural { var, sign: -1.0 });
                cost.push(-lp.objective[var]);
            }
        }

        // Rows with rhs < 0 are negated; a `≥ 0` row is negated too so that
        // its slack enters with +1 and can start in the basis.
        let row_sign: Vec<f64> = lp
            .constraints
            .iter()
            .map(|row| {
                if row.rhs < 0.0 || (row.rhs == 0.0 && row.relation == Relation::Ge) {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        let rhs: Vec<f64> = lp
            .constraints
            .iter()
            .zip(&row_sign)
            .map(|(row, s)| row.rhs * s)
            .collect();

        let mut columns = Vec::with_capacity((kinds.len() + 2 * m) * m);
        for kind in &kinds {
            if let Column::Structural { var, sign } = *kind {
                for (row, s) in lp.constraints.iter().zip(&row_sign) {
                    columns.push(row.coeffs[var] * sign * s);
                }
            }
        }

        let mut initial: Vec<Option<usize>> = vec![None; m];
        for (i, row) in lp.constraints.iter().enumerate() {
            let coeff = match row.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => continue,
            } * row_sign[i];
            let j = kinds.len();
            kinds.push(Column::Slack);
            cost.push(0.0);
            columns.extend((0..m).map(|k| if k == i { coeff } else { 0.0 }));
            if coeff > 0.0 {
                initial[i] = Some(j);
            }
        }

        // Crash: a structural column with a single positive entry in an
        // uncovered row can start basic at value rhs / entry.
        let num_structural = kinds
            .iter()
            .take_while(|k| matches!(k, Column::Structural { .. }))
            .count();
        let mut used = vec![false; num_structural];
        for j in 0..num_structural {
            let col = &columns[j * m..(j + 1) * m];
            let mut nonzero = col.iter().enumerate().filter(|(_, v)| **v != 0.0);
            if let (Some((i, &v)), None) = (nonzero.next(), nonzero.next()) {
                if v > 0.0 && initial[i].is_none() && !used[j] {
                    initial[i] = Some(j);
                    used[j] = true;
                }
            }
        }

        let mut initial_basis = Vec::with_capacity(m);
        for (i, slot) in initial.iter().enumerate() {
            match slot {
                Some(j) => initial_basis.push(*j),
                None => {
                    initial_basis.push(kinds.len());
                    kinds.push(Column::Artificial);
                    cost.push(0.0);
                    columns.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
                }
            }
        }

        Self {
            m,
            columns,
            kinds,
            cost,
            rhs,
            initial_basis,
        }
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct RevisedSimplex<'a> {
    sf: &'a StandardForm,
    opts: &'a SolverOptions,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Dense row-major inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl<'a> RevisedSimplex<'a> {
    fn new(sf: &'a StandardForm, opts: &'a SolverOptions) -> Result<Self, LpError> {
        let mut in_basis = vec![false; sf.num_cols()];
        for &j in &sf.initial_basis {
            in_basis[j] = true;
        }
        let mut s = Self {
            sf,
            opts,
            basis: sf.initial_basis.clone(),
            in_basis,
            binv: Vec::new(),
            xb: Vec::new(),
            pivots: 0,
            since_refactor: 0,
        };
        s.refactor()?;
        Ok(s)
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.sf.m;
        let b = DMatrix::from_fn(m, m, |i, k| self.sf.column(self.basis[k])[i]);
        let inv = b.try_inverse().ok_or(LpError::SingularBasis)?;
        self.binv = (0..m * m).map(|idx| inv[(idx / m, idx % m)]).collect();
        self.xb = (0..m)
            .map(|i| {
                let row = &self.binv[i * m..(i + 1) * m];
                row.iter().zip(&self.sf.rhs).map(|(a, b)| a * b).sum()
            })
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, a) in y.iter_mut().zip(row) {
                    *yk += cb * a;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.sf.column(j).iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let col = self.sf.column(j);
        (0..m)
            .map(|i| {
                self.binv[i * m..(i + 1) * m]
                    .iter()
                    .zip(col)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn pivot(&mut self, row: usize, entering: usize, alpha: &[f64]) -> Result<(), LpError> {
        if self.pivots >= self.opts.max_pivots {
            return Err(LpError::MaxPivotsExceeded(self.opts.max_pivots));
        }
        let m = self.sf.m;
        let step = self.xb[row].max(0.0) / alpha[row];
        for i in 0..m {
            if i != row {
                self.xb[i] -= step * alpha[i];
            }
        }
        self.xb[row] = step;

        let piv = alpha[row];
        let (before, rest) = self.binv.split_at_mut(row * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, chunk) in before
            .chunks_exact_mut(m)
            .chain(after.chunks_exact_mut(m))
            .enumerate()
        {
            let i = if i < row { i } else { i + 1 };
            let factor = alpha[i];
            if factor != 0.0 {
                for (v, p) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= factor * p;
                }
            }
        }

        self.in_basis[self.basis[row]] = false;
        self.in_basis[entering] = true;
        self.basis[row] = entering;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= self.opts.refactor_every {
            self.refactor()?;
        }
        Ok(())
    }

    fn choose_entering(
        &self,
        cost: &[f64],
        y: &[f64],
        allowed: &dyn Fn(usize) -> bool,
        bland: bool,
    ) -> Option<usize> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.sf.num_cols() {
            if self.in_basis[j] || !allowed(j) {
                continue;
            }
            let d = self.reduced_cost(cost, y, j);
            if d < -tol {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Ratio test. Entries below `pivot_tol` relative to the column's
    /// largest entry are never pivots. Under Bland's rule the leaving row is
    /// the minimum ratio with ties to the smallest basic column index;
    /// otherwise a two-pass Harris test picks the largest pivot among rows
    /// whose ratio is within the feasibility tolerance of the minimum.
    fn choose_leaving(&self, alpha: &[f64], bland: bool) -> Option<usize> {
        let amax = alpha.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let tol = self.opts.pivot_tol * amax;
        let eligible = |i: usize| alpha[i] > tol;
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if !eligible(i) {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            return best.map(|(i, _)| i);
        }
        let feas = self.opts.feasibility_tol;
        let bound = (0..alpha.len())
            .filter(|&i| eligible(i))
            .map(|i| (self.xb[i].max(0.0) + feas) / alpha[i])
            .fold(f64::INFINITY, f64::min);
        if bound == f64::INFINITY {
            return None;
        }
        let mut best: Option<usize> = None;
        for i in (0..alpha.len()).filter(|&i| eligible(i)) {
            if self.xb[i].max(0.0) / alpha[i] > bound {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if alpha[i] > alpha[b] || alpha[i] == alpha[b] && self.basis[i] < self.basis[b] => Some(i),
                keep => keep,
            };
        }
        best
    }

    fn run_phase(
        &mut self,
        cost: &[f64],
        allowed: &dyn Fn(usize) -> bool,
    ) -> Result<PhaseOutcome, LpError> {
        let mut degenerate_streak = 0usize;
        loop {
            let y = self.duals(cost);
            let bland = match self.opts.pivot_rule {
                PivotRule::Bland => true,
                PivotRule::DantzigBlandFallback => {
                    degenerate_streak >= self.opts.degenerate_streak_limit
                }
            };
            let Some(q) = self.choose_entering(cost, &y, allowed, bland) else {
                return Ok(PhaseOutcome::Optimal);
            };
            let alpha = self.ftran(q);
            let Some(r) = self.choose_leaving(&alpha, bland) else {
                return Ok(PhaseOutcome::Unbounded);
            };
            let step = self.xb[r].max(0.0) / alpha[r];
            if step <= self.opts.feasibility_tol {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, q, &alpha)?;
        }
    }

    /// Pivots zero-level artificials out of the basis where some real column
    /// can replace them; rows where none can are redundant and keep theirs.
    fn expel_artificials(&mut self) -> Result<(), LpError> {
        let m = self.sf.m;
        for r in 0..m {
            if self.sf.kinds[self.basis[r]] != Column::Artificial {
                continue;
            }
            let row = self.binv[r * m..(r + 1) * m].to_vec();
            let candidate = (0..self.sf.num_cols()).find(|&j| {
                !self.in_basis[j]
                    && self.sf.kinds[j] != Column::Artificial
                    && self
                        .sf
                        .column(j)
                        .iter()
                        .zip(&row)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        .abs()
                        > 1e-7
            });
            if let Some(j) = candidate {
                let alpha = self.ftran(j);
                self.pivot(r, j, &alpha)?;
                self.xb[r] = self.xb[r].max(0.0);
            }
        }
        Ok(())
    }
}

/// Solves `lp` by two-phase revised simplex.
///
/// Free variables are split into a difference of nonnegative parts. Phase 1
/// minimizes the sum of artificials needed for rows without a slack or
/// singleton column to start basic. The result is a pure function of the
/// input: pivot choices depend only on column order.
pub fn solve_lp(lp: &LinearProgram, options: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let sf = StandardForm::build(lp);
    let m = sf.m;

    if m == 0 {
        // Only sign restrictions: bounded iff no cost pushes a variable to ±∞.
        let unbounded = lp
            .objective
            .iter()
            .zip(&lp.nonneg)
            .any(|(&c, &nonneg)| c < 0.0 || (!nonneg && c != 0.0));
        return Ok(LpSolution {
            status: if unbounded {
                LpStatus::Unbounded
            } else {
                LpStatus::Optimal
            },
            values: vec![0.0; lp.num_vars],
            objective_value: 0.0,
            duality_gap_bound: 0.0,
            certificate: Certificate::default(),
            pivots: 0,
        });
    }

    let mut simplex = RevisedSimplex::new(&sf, options)?;
    let has_artificial = sf.kinds.contains(&Column::Artificial);

    if has_artificial {
        let phase1_cost: Vec<f64> = sf
            .kinds
            .iter()
            .map(|k| if *k == Column::Artificial { 1.0 } else { 0.0 })
            .collect();
        simplex.run_phase(&phase1_cost, &|_| true)?;
        simplex.refactor()?;
        let infeasibility: f64 = simplex
            .basis
            .iter()
            .zip(&simplex.xb)
            .filter(|(j, _)| sf.kinds[**j] == Column::Artificial)
            .map(|(_, x)| x.max(0.0))
            .sum();
        let scale = 1.0 + sf.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeasibility > options.feasibility_tol * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                values: vec![0.0; lp.num_vars],
                objective_value: f64::NAN,
                duality_gap_bound: f64::NAN,
                certificate: Certificate::default(),
                pivots: simplex.pivots,
            });
        }
        simplex.expel_artificials()?;
    }

    let not_artificial = |j: usize| sf.kinds[j] != Column::Artificial;
    let outcome = simplex.run_phase(&sf.cost, &not_artificial)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            values: vec![0.0; lp.num_vars],
            objective_value: f64::NEG_INFINITY,
            duality_gap_bound: f64::NAN,
            certificate: Certificate::default(),
            pivots: simplex.pivots,
        });
    }
    simplex.refactor()?;

    let mut x = vec![0.0; sf.num_cols()];
    for (&j, &v) in simplex.basis.iter().zip(&simplex.xb) {
        x[j] = v;
    }

    let y = simplex.duals(&sf.cost);
    let mut certificate = Certificate::default();
    let mut gap = 0.0;
    for j in 0..sf.num_cols() {
        if sf.kinds[j] == Column::Artificial {
            continue;
        }
        let d = simplex.reduced_cost(&sf.cost, &y, j);
        certificate.dual_infeasibility = certificate.dual_infeasibility.max(-d);
        certificate.complementary_slackness =
            certificate.complementary_slackness.max((x[j] * d).abs());
        gap += x[j] * d;
    }
    for i in 0..m {
        let lhs: f64 = (0..sf.num_cols()).map(|j| sf.column(j)[i] * x[j]).sum();
        certificate.primal_infeasibility =
            certificate.primal_infeasibility.max((lhs - sf.rhs[i]).abs());
    }
    for &v in &x {
        certificate.primal_infeasibility = certificate.primal_infeasibility.max(-v);
    }

    let mut values = vec![0.0; lp.num_vars];
    for (j, kind) in sf.kinds.iter().enumerate() {
        if let Column::Structural { var, sign } = *kind {
            values[var] += sign * x[j].max(0.0);
        }
    }
    let objective_value = super::objective_at(lp, &values);

    Ok(LpSolution {
        status: LpStatus::Optimal,
        values,
        objective_value,
        duality_gap_bound: gap.abs(),
        certificate,
        pivots: simplex.pivots,
    })
}
