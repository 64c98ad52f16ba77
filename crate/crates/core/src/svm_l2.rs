//! Ridge-penalized hinge loss: `Σ_i [1 - y_i(x_i·β + β_0)]_+ + λ‖β‖²`.
//!
//! Solved through the box-constrained dual with `C = 1/(2λ)`: a
//! primal-dual interior-point method gets close, then the free support
//! vectors define a linear system whose solution is the exact optimum when
//! the active set is right, and a few SMO sweeps (second-order working-set
//! selection) clean up otherwise. Each refinement is kept only if it
//! shrinks the duality gap. The intercept is then recomputed by exact minimization
//! of the (convex, piecewise-linear) hinge sum for the fixed `β`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;
const REL_GAP_TARGET: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2FitResult {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// Primal objective at the returned `(β, β_0)`.
    pub objective: f64,
    /// Primal minus dual objective, in the same units as `objective`.
    pub duality_gap: f64,
}

/// `Σ_i [1 - y_i(x_i·β + b)]_+ + λ‖β‖²`.
pub fn l2_objective(x: &DMatrix<f64>, y: &[f64], beta: &[f64], intercept: f64, lambda: f64) -> f64 {
    let f = x * DVector::from_column_slice(beta);
    hinge_sum(f.as_slice(), y, intercept) + lambda * beta.iter().map(|b| b * b).sum::<f64>()
}

pub fn hinge_sum(f: &[f64], y: &[f64], intercept: f64) -> f64 {
    f.iter()
        .zip(y)
        .map(|(fi, yi)| (1.0 - yi * (fi + intercept)).max(0.0))
        .sum()
}

/// Minimizer of `b ↦ Σ_i [1 - y_i(f_i + b)]_+`. On a flat optimal interval
/// the midpoint is returned.
pub fn optimal_intercept(f: &[f64], y: &[f64]) -> f64 {
    // Positive samples contribute slope -1 left of 1 - f_i, negative samples
    // slope +1 right of -1 - f_i; both breakpoints raise the slope by one.
    let mut breakpoints: Vec<f64> = f
        .iter()
        .zip(y)
        .map(|(fi, yi)| if *yi > 0.0 { 1.0 - fi } else { -1.0 - fi })
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    let n_pos = y.iter().filter(|v| **v > 0.0).count() as i64;
    if breakpoints.is_empty() {
        return 0.0;
    }
    if n_pos == 0 {
        return breakpoints[0];
    }
    let mut slope = -n_pos;
    for (k, bp) in breakpoints.iter().enumerate() {
        slope += 1;
        if slope > 0 {
            return *bp;
        }
        if slope == 0 {
            return match breakpoints.get(k + 1) {
                Some(next) => 0.5 * (bp + next),
                None => *bp,
            };
        }
    }
    breakpoints[breakpoints.len() - 1]
}

struct DualSolution {
    alpha: Vec<f64>,
    /// Scaled primal `½‖β‖² + C Σ ξ` minus dual.
    gap: f64,
    primal: f64,
}

struct Smo<'a> {
    k: &'a DMatrix<f64>,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn new(k: &'a DMatrix<f64>, y: &'a [f64], c: f64) -> Self {
        let n = y.len();
        Self {
            k,
            y,
            c,
            alpha: vec![0.0; n],
            grad: vec![-1.0; n],
        }
    }

    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.k[(i, j)]
    }

    fn reset_gradient(&mut self) {
        let n = self.y.len();
        for i in 0..n {
            self.grad[i] = -1.0 + (0..n).map(|j| self.q(i, j) * self.alpha[j]).sum::<f64>();
        }
    }

    /// Returns `None` when the maximal KKT violation is below `eps`.
    fn select(&self, eps: f64) -> Option<(usize, usize)> {
        let n = self.y.len();
        let (y, a, g, c) = (self.y, &self.alpha, &self.grad, self.c);
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] > 0.0 { a[t] < c } else { a[t] > 0.0 };
            if up && -y[t] * g[t] >= gmax {
                gmax = -y[t] * g[t];
                i_sel = Some(t);
            }
        }
        let i = i_sel?;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        let kii = self.k[(i, i)];
        for t in 0..n {
            let low = if y[t] > 0.0 { a[t] > 0.0 } else { a[t] < c };
            if !low {
                continue;
            }
            let v = y[t] * g[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = (kii + self.k[(t, t)] - 2.0 * self.k[(i, t)]).max(TAU);
                let obj = -diff * diff / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < eps {
            return None;
        }
        j_sel.map(|j| (i, j))
    }

    fn update(&mut self, i: usize, j: usize) {
        let (c, y) = (self.c, self.y);
        let old_i = self.alpha[i];
        let old_j = self.alpha[j];
        let (mut ai, mut aj) = (old_i, old_j);
        let (gi, gj) = (self.grad[i], self.grad[j]);
        if y[i] != y[j] {
            let quad = (self.q(i, i) + self.q(j, j) + 2.0 * self.q(i, j)).max(TAU);
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (self.q(i, i) + self.q(j, j) - 2.0 * self.q(i, j)).max(TAU);
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..y.len() {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    fn run(&mut self, eps: f64, max_iter: usize) -> bool {
        for _ in 0..max_iter {
            match self.select(eps) {
                Some((i, j)) => self.update(i, j),
                None => return true,
            }
        }
        false
    }

    fn evaluate(&self, alpha: &[f64]) -> DualSolution {
        let n = self.y.len();
        let ay: Vec<f64> = alpha.iter().zip(self.y).map(|(a, y)| a * y).collect();
        let f: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| ay[j] * self.k[(i, j)]).sum())
            .collect();
        let norm2: f64 = ay.iter().zip(&f).map(|(a, f)| a * f).sum::<f64>().max(0.0);
        let intercept = optimal_intercept(&f, self.y);
        let primal = 0.5 * norm2 + self.c * hinge_sum(&f, self.y, intercept);
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm2;
        DualSolution {
            alpha: alpha.to_vec(),
            gap: primal - dual,
            primal,
        }
    }

    /// Solves the KKT system on the current free set: margin equalities for
    /// free points plus `Σ α_i y_i = 0`, with bounded points held fixed.
    fn polish(&self) -> Option<Vec<f64>> {
        let n = self.y.len();
        let (y, c) = (self.y, self.c);
        let free: Vec<usize> = (0..n)
            .filter(|&i| self.alpha[i] > 0.0 && self.alpha[i] < c)
            .collect();
        if free.is_empty() {
            return None;
        }
        let at_c: Vec<usize> = (0..n).filter(|&i| self.alpha[i] >= c).collect();
        let m = free.len();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = y[j] * self.k[(i, j)];
            }
            a[(r, m)] = 1.0;
            rhs[r] = y[i] - at_c.iter().map(|&j| y[j] * c * self.k[(i, j)]).sum::<f64>();
        }
        for (s, &j) in free.iter().enumerate() {
            a[(m, s)] = y[j];
        }
        rhs[m] = -at_c.iter().map(|&j| y[j] * c).sum::<f64>();
        let sol = a.svd(true, true).solve(&rhs, 1e-12).ok()?;
        let mut alpha = self.alpha.clone();
        for (s, &j) in free.iter().enumerate() {
            let v = sol[s];
            if !v.is_finite() || v < -1e-9 * c.max(1.0) || v > c * (1.0 + 1e-9) {
                return None;
            }
            alpha[j] = v.clamp(0.0, c);
        }
        Some(alpha)
    }
}

/// Mehrotra predictor-corrector on the dual
/// `min ½αᵀQα - Σα  s.t.  yᵀα = 0, 0 ≤ α ≤ C`, `Q = diag(y) K diag(y)`.
fn interior_point(k: &DMatrix<f64>, y: &[f64], c: f64) -> Vec<f64> {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let yv = DVector::from_column_slice(y);
    let mut a = DVector::from_element(n, 0.5 * c.min(1.0));
    let mut z = DVector::from_element(n, 1.0);
    let mut w = DVector::from_element(n, 1.0);
    let mut nu = 0.0;
    let scale = 1.0 + q.amax() + c;
    for _ in 0..200 {
        let s = a.map(|v| c - v);
        let mu = (a.dot(&z) + s.dot(&w)) / (2 * n) as f64;
        let qa = &q * &a;
        let r_d = &qa - DVector::from_element(n, 1.0) + &yv * nu - &z + &w;
        let r_p = yv.dot(&a);
        if mu < 1e-16 * scale && r_d.amax() < 1e-13 * scale && r_p.abs() < 1e-13 * scale {
            break;
        }
        let mut h = q.clone();
        for i in 0..n {
            h[(i, i)] += z[i] / a[i] + w[i] / s[i];
        }
        let mut jitter = 0.0;
        let chol = loop {
            let mut hj = h.clone();
            for i in 0..n {
                hj[(i, i)] += jitter;
            }
            if let Some(ch) = hj.cholesky() {
                break ch;
            }
            jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 100.0 };
        };
        let solve = |rhs: &DVector<f64>| chol.solve(rhs);
        let v = solve(&yv);
        let yv_v = yv.dot(&v);
        // Newton direction for complementarity targets r_z, r_w.
        let direction = |r_z: &DVector<f64>, r_w: &DVector<f64>| {
            let rhs = DVector::from_fn(n, |i, _| -r_d[i] - r_z[i] / a[i] + r_w[i] / s[i]);
            let u = solve(&rhs);
            let dnu = if yv_v.abs() > 0.0 { (yv.dot(&u) + r_p) / yv_v } else { 0.0 };
            let da = u - &v * dnu;
            let dz = DVector::from_fn(n, |i, _| (-r_z[i] - z[i] * da[i]) / a[i]);
            let dw = DVector::from_fn(n, |i, _| (-r_w[i] + w[i] * da[i]) / s[i]);
            (da, dnu, dz, dw)
        };
        let step = |da: &DVector<f64>, dz: &DVector<f64>, dw: &DVector<f64>| {
            let mut t: f64 = 1.0;
            for i in 0..n {
                if da[i] < 0.0 {
                    t = t.min(-a[i] / da[i]);
                }
                if da[i] > 0.0 {
                    t = t.min(s[i] / da[i]);
                }
                if dz[i] < 0.0 {
                    t = t.min(-z[i] / dz[i]);
                }
                if dw[i] < 0.0 {
                    t = t.min(-w[i] / dw[i]);
                }
            }
            t
        };
        let r_z = a.component_mul(&z);
        let r_w = s.component_mul(&w);
        let (da, _, dz, dw) = direction(&r_z, &r_w);
        let t_aff = step(&da, &dz, &dw);
        let mu_aff = ((&a + &da * t_aff).dot(&(&z + &dz * t_aff))
            + (&s - &da * t_aff).dot(&(&w + &dw * t_aff)))
            / (2 * n) as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);
        let r_z2 = DVector::from_fn(n, |i, _| r_z[i] + da[i] * dz[i] - sigma * mu);
        let r_w2 = DVector::from_fn(n, |i, _| r_w[i] - da[i] * dw[i] - sigma * mu);
        let (da, dnu, dz, dw) = direction(&r_z2, &r_w2);
        let t = (0.995 * step(&da, &dz, &dw)).min(1.0);
        a += &da * t;
        z += &dz * t;
        w += &dw * t;
        nu += dnu * t;
        for i in 0..n {
            a[i] = a[i].clamp(f64::MIN_POSITIVE, c * (1.0 - f64::EPSILON));
        }
    }
    a.iter()
        .map(|&v| {
            if v < 1e-11 * c {
                0.0
            } else if v > c * (1.0 - 1e-11) {
                c
            } else {
                v
            }
        })
        .collect()
}

/// Interior-point solve followed by refinement: a linear solve on the free
/// set and a bounded number of SMO steps, keeping whichever iterate has the
/// smallest duality gap.
fn solve_dual(k: &DMatrix<f64>, y: &[f64], c: f64) -> DualSolution {
    let n = y.len();
    let mut smo = Smo::new(k, y, c);
    smo.alpha = interior_point(k, y, c);
    smo.reset_gradient();
    let mut best = smo.evaluate(&smo.alpha);
    let max_iter = 5 * n * n + 1000;
    let mut eps = 1e-9;
    for _ in 0..4 {
        if let Some(polished) = smo.polish() {
            let p = smo.evaluate(&polished);
            if p.gap < best.gap {
                best = p;
            }
        }
        if best.gap <= REL_GAP_TARGET * best.primal.max(1.0) {
            break;
        }
        smo.alpha = best.alpha.clone();
        smo.reset_gradient();
        smo.run(eps, max_iter);
        smo.reset_gradient();
        let candidate = smo.evaluate(&smo.alpha);
        if candidate.gap < best.gap {
            best = candidate;
        }
        eps *= 0.01;
    }
    best
}

fn check_inputs(y: &[f64], lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let pos = y.iter().filter(|v| **v > 0.0).count();
    if pos == 0 || pos == y.len() {
        log::warn!("single-class training data; classifier would be constant");
        return Err(Error::SingleClassData);
    }
    Ok(())
}

/// Fits the ridge-penalized hinge SVM on `data` (intercept unpenalized).
pub fn fit_l2_svm(data: &Dataset, lambda: f64) -> Result<L2FitResult> {
    fit_l2_design(data.x(), data.y(), lambda)
}

pub(crate) fn fit_l2_design(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<L2FitResult> {
    check_inputs(y, lambda)?;
    let k = x * x.transpose();
    let c = 0.5 / lambda;
    let dual = solve_dual(&k, y, c);
    let ay = DVector::from_iterator(y.len(), dual.alpha.iter().zip(y).map(|(a, y)| a * y));
    let beta = x.transpose() * ay;
    let f = x * &beta;
    let intercept = optimal_intercept(f.as_slice(), y);
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let objective = hinge_sum(f.as_slice(), y, intercept) + lambda * beta.norm_squared();
    Ok(L2FitResult {
        intercept,
        coefficients,
        lambda,
        objective,
        duality_gap: 2.0 * lambda * dual.gap.max(0.0),
    })
}

/// Thin factorization `B = R Vᵀ` with `R = U D`; singular values below
/// `1e-10 · σ_max` are dropped.
pub fn reduce_design(design: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, p) = design.shape();
    let svd = design.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| sigma_max > 0.0 && svd.singular_values[k] > 1e-10 * sigma_max)
        .collect();
    let r = DMatrix::from_fn(n, keep.len(), |i, k| u[(i, keep[k])] * svd.singular_values[keep[k]]);
    let v = DMatrix::from_fn(p, keep.len(), |j, k| v_t[(keep[k], j)]);
    (r, v)
}

/// Same problem as [`fit_l2_svm`] on an `n × p` design, solved in the
/// `rank(B) ≤ n` dimensional space spanned by the left factor and mapped
/// back through `α = V γ`.
pub fn fit_l2_svm_svd_reduced(design: &DMatrix<f64>, labels: &[f64], lambda: f64) -> Result<L2FitResult> {
    if design.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: design.nrows(),
            got: labels.len(),
        });
    }
    check_inputs(labels, lambda)?;
    let (r, v) = reduce_design(design);
    let reduced = fit_l2_design(&r, labels, lambda)?;
    let gamma = DVector::from_column_slice(&reduced.coefficients);
    let alpha = &v * gamma;
    Ok(L2FitResult {
        intercept: reduced.intercept,
        coefficients: alpha.iter().copied().collect(),
        lambda,
        objective: l2_objective(design, labels, alpha.as_slice(), reduced.intercept, lambda),
        duality_gap: reduced.duality_gap,
    })
}

/// Logarithmic grid of `count` values over `[1e-4, 1e4] · n/p`.
pub fn initial_lambda_grid(n: usize, p: usize, count: usize) -> Vec<f64> {
    let scale = n as f64 / p.max(1) as f64;
    log_grid(1e-4 * scale, 1e4 * scale, count)
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}
