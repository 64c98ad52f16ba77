//! Test-only oracles, kept independent of the library's solvers.

#![allow(dead_code)]

use heredity_svm::heredity::{HeredityGraph, HeredityPolicy};
use heredity_svm::lp::{LinearProgram, Relation};
use heredity_svm::splines::{evaluate_tensor, SplineBasis, SplineDesign};
use heredity_svm::structured::Penalty;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum of `c·v` over every basic feasible point, found by solving each
/// square system of active constraints. `None` means no feasible vertex.
pub fn vertex_enumeration(lp: &LinearProgram, tol: f64) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    // Candidate hyperplanes: every row plus v_j = 0 for sign-restricted vars.
    let mut planes: Vec<(Vec<f64>, f64, bool)> = lp
        .constraints()
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs, c.relation == Relation::Eq))
        .collect();
    for (j, &nonneg) in lp.nonneg_mask().iter().enumerate() {
        if nonneg {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e, 0.0, false));
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in combinations(planes.len(), n) {
        if planes
            .iter()
            .enumerate()
            .any(|(i, p)| p.2 && !subset.contains(&i))
        {
            continue;
        }
        let a = DMatrix::from_fn(n, n, |r, c| planes[subset[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| planes[subset[r]].1);
        let Some(v) = a.lu().solve(&b) else { continue };
        let v: Vec<f64> = v.iter().copied().collect();
        if !v.iter().all(|x| x.is_finite()) || !feasible(lp, &v, tol) {
            continue;
        }
        let obj: f64 = lp.objective().iter().zip(&v).map(|(c, x)| c * x).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, v));
        }
    }
    best
}

fn feasible(lp: &LinearProgram, v: &[f64], tol: f64) -> bool {
    for (j, &nonneg) in lp.nonneg_mask().iter().enumerate() {
        if nonneg && v[j] < -tol {
            return false;
        }
    }
    lp.constraints().iter().all(|c| {
        let lhs: f64 = c.coeffs.iter().zip(v).map(|(a, x)| a * x).sum();
        let scale = tol * (1.0 + c.rhs.abs());
        match c.relation {
            Relation::Le => lhs <= c.rhs + scale,
            Relation::Ge => lhs >= c.rhs - scale,
            Relation::Eq => (lhs - c.rhs).abs() <= scale,
        }
    })
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Random LP with at most 6 variables and 10 rows whose feasible set is
/// bounded: nonnegative variables share a positive budget row and each free
/// variable gets a box.
pub fn random_bounded_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6usize);
    let num_free = if n <= 4 { rng.random_range(0..=1usize) } else { 0 };
    let mut lp = LinearProgram::new(n);
    lp.set_objective((0..n).map(|_| rng.random_range(-5.0..5.0)).collect());
    for j in 0..num_free {
        lp.set_free(j);
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        lp.add_constraint(e.clone(), Relation::Le, rng.random_range(1.0..5.0));
        lp.add_constraint(e, Relation::Ge, -rng.random_range(1.0..5.0));
    }
    let budget: Vec<f64> = (0..n)
        .map(|j| if j < num_free { 0.0 } else { rng.random_range(0.5..2.0) })
        .collect();
    lp.add_constraint(budget, Relation::Le, rng.random_range(2.0..10.0));
    let extra = rng.random_range(0..=(10 - lp.constraints().len()).min(7));
    for _ in 0..extra {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    (rng.random_range(-3.0f64..3.0) * 4.0).round() / 4.0
                }
            })
            .collect();
        let relation = match rng.random_range(0..20) {
            0..=11 => Relation::Le,
            12..=17 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = (rng.random_range(-2.0f64..6.0) * 4.0).round() / 4.0;
        lp.add_constraint(coeffs, relation, rhs);
    }
    lp
}

/// `Σ_i [1 - y_i (Σ_j s_ij θ_j + b)]_+` minimized over `b` exactly: the
/// function is convex piecewise linear in `b`, so its minimum sits at a
/// breakpoint `b = y_i - f_i`.
pub fn hinge_min_over_intercept(f: &[f64], y: &[f64]) -> f64 {
    let total = |b: f64| -> f64 {
        f.iter()
            .zip(y)
            .map(|(fi, yi)| (1.0 - yi * (fi + b)).max(0.0))
            .sum()
    };
    f.iter()
        .zip(y)
        .map(|(fi, yi)| total(yi - fi))
        .fold(f64::INFINITY, f64::min)
}

const N: usize = 8;

/// A small structured problem over random effect scores.
pub struct Instance {
    pub scores: DMatrix<f64>,
    pub y: Vec<f64>,
    pub graph: HeredityGraph,
    pub penalty: Penalty,
    /// Grid spacing for [`grid_oracle`].
    pub step: f64,
}

impl Instance {
    fn value(&self, theta: &[f64]) -> f64 {
        let f: Vec<f64> = (0..N)
            .map(|i| (0..theta.len()).map(|j| self.scores[(i, j)] * theta[j]).sum())
            .collect();
        let hinge = hinge_min_over_intercept(&f, &self.y);
        match self.penalty {
            Penalty::Lagrangian(l) => hinge + l * theta.iter().sum::<f64>(),
            Penalty::Constraint(_) => hinge,
        }
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        if theta.iter().any(|&t| t < 0.0) {
            return false;
        }
        if let Penalty::Constraint(m) = self.penalty {
            if theta.iter().sum::<f64>() > m + 1e-12 {
                return false;
            }
        }
        self.graph.theta_violations(theta, self.graph.policy(), 0.0).is_empty()
    }
}

/// Grid search on `[0, 3]^E` followed by a shrinking pattern search from the
/// best grid point.
pub fn grid_oracle(inst: &Instance) -> f64 {
    let step = inst.step;
    let e = inst.graph.num_effects();
    let ticks = (3.0 / step).round() as usize + 1;
    let mut best = (f64::INFINITY, vec![0.0; e]);
    let mut idx = vec![0usize; e];
    loop {
        let theta: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
        if inst.feasible(&theta) {
            let v = inst.value(&theta);
            if v < best.0 {
                best = (v, theta);
            }
        }
        let mut d = 0;
        while d < e {
            idx[d] += 1;
            if idx[d] < ticks {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == e {
            break;
        }
    }
    let (mut val, mut theta) = best;
    let mut h = step;
    while h > 1e-7 {
        let mut improved = false;
        for a in 0..e {
            for b in a..e {
                for (sa, sb) in [(1.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                    let mut t = theta.clone();
                    t[a] += sa * h;
                    if a != b {
                        t[b] += sb * h;
                    } else if sb != 0.0 {
                        continue;
                    }
                    if inst.feasible(&t) {
                        let v = inst.value(&t);
                        if v < val - 1e-15 {
                            val = v;
                            theta = t;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    val
}

fn random_instance(seed: u64, graph: HeredityGraph, penalty: Penalty, step: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = graph.num_effects();
    let scores = DMatrix::from_fn(N, e, |_, _| rng.random_range(-1.5..1.5));
    let y = (0..N).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    Instance {
        scores,
        y,
        graph,
        penalty,
        step,
    }
}

/// Penalties that keep every optimum inside `[0, 3]^E`: `Σθ ≤ M ≤ 3`, or
/// `λ ≥ N/3` since the objective at `θ = 0` is at most `N`.
fn penalty_for(k: u64) -> Penalty {
    match k % 4 {
        0 => Penalty::Constraint(0.7),
        1 => Penalty::Constraint(2.5),
        2 => Penalty::Lagrangian(N as f64 / 3.0),
        _ => Penalty::Lagrangian(4.0),
    }
}

/// Fifty instances: two effects under strong heredity on a 0.01 grid, then
/// two mains and their interaction, alternating strong and weak, on a 0.05
/// grid.
pub fn structured_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for k in 0..25u64 {
        let graph = HeredityGraph::new(vec![vec![], vec![0]], HeredityPolicy::Strong);
        out.push(random_instance(1000 + k, graph, penalty_for(k), 0.01));
    }
    for k in 0..25u64 {
        let policy = if k % 2 == 0 { HeredityPolicy::Strong } else { HeredityPolicy::Weak };
        let graph = HeredityGraph::new(vec![vec![], vec![], vec![0, 1]], policy);
        out.push(random_instance(2000 + k, graph, penalty_for(k), 0.05));
    }
    out
}

/// Cox–de Boor recursion straight from the definition, with `0/0 = 0` and
/// the last nonempty span closed on the right.
pub fn cox_de_boor(knots: &[f64], k: usize, degree: usize, u: f64) -> f64 {
    if degree == 0 {
        let last = knots.iter().rposition(|&t| t < knots[knots.len() - 1]).unwrap_or(0);
        let inside = knots[k] <= u && u < knots[k + 1];
        let right_end = k == last && u == knots[k + 1];
        return if inside || right_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[k + degree] - knots[k];
    if d1 > 0.0 {
        v += (u - knots[k]) / d1 * cox_de_boor(knots, k, degree - 1, u);
    }
    let d2 = knots[k + degree + 1] - knots[k + 1];
    if d2 > 0.0 {
        v += (knots[k + degree + 1] - u) / d2 * cox_de_boor(knots, k + 1, degree - 1, u);
    }
    v
}

/// Checks a random training design against the basis invariants at `tol`:
/// agreement with the recursion, nonnegativity, partition of unity, support
/// on `[t_k, t_{k+d+1}]`, and tensor blocks equal to products of marginals.
/// Returns a description of each failure.
pub fn spline_invariant_failures(seed: u64, tol: f64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(60, 3, |_, _| rng.random_range(-2.5..2.5));
    let mut failures = Vec::new();
    for m in [4, 5, 7] {
        let design = SplineDesign::build(&raw, m, 3).expect("spread-out columns");
        for b in design.bases() {
            check_basis(b, &mut rng, tol, &mut failures);
        }
        for _ in 0..50 {
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let row = design.row(&z);
            for (k, &(r, j)) in design.pairs().iter().enumerate() {
                let block = &row[design.blocks()[3 + k].clone()];
                let (br, bj) = (&design.bases()[r], &design.bases()[j]);
                let tensor = evaluate_tensor(br, bj, z[r], z[j]);
                let marg_r = br.evaluate(z[r]);
                let marg_j = bj.evaluate(z[j]);
                for (c, (&a, &t)) in block.iter().zip(&tensor).enumerate() {
                    let direct = marg_r[c / marg_j.len()] * marg_j[c % marg_j.len()];
                    if (a - direct).abs() > tol || (t - direct).abs() > tol {
                        failures.push(format!("tensor ({r},{j}) column {c} at {z:?}"));
                    }
                }
                let total: f64 = block.iter().sum();
                if (total - 1.0).abs() > tol {
                    failures.push(format!("tensor ({r},{j}) sums to {total}"));
                }
            }
        }
    }
    failures
}

fn check_basis(b: &SplineBasis, rng: &mut ChaCha8Rng, tol: f64, failures: &mut Vec<String>) {
    let t = b.knots();
    let d = b.degree();
    let mut points: Vec<f64> = (0..200).map(|_| rng.random_range(b.lower()..b.upper())).collect();
    points.extend_from_slice(t);
    for u in points {
        let v = b.evaluate(u);
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > tol {
            failures.push(format!("basis {} sums to {total} at {u}", b.variable()));
        }
        for (k, &vk) in v.iter().enumerate() {
            if vk < -tol {
                failures.push(format!("basis {} function {k} negative at {u}", b.variable()));
            }
            if (vk - cox_de_boor(t, k, d, u)).abs() > tol {
                failures.push(format!("basis {} function {k} disagrees with recursion at {u}", b.variable()));
            }
            if (u < t[k] || u > t[k + d + 1]) && vk.abs() > tol {
                failures.push(format!("basis {} function {k} nonzero outside its support at {u}", b.variable()));
            }
        }
    }
}
