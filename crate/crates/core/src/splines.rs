//! B-spline bases, tensor products, and the ridge-penalized hinge fit that
//! supplies initial effect functions for the nonparametric garrote.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm_l2::{fit_l2_svm_svd_reduced, L2FitResult};

/// Clamped (open-uniform multiplicity) B-spline basis on `[lower, upper]`.
///
/// The knot vector repeats each boundary `degree + 1` times, so the basis
/// has `interior + degree + 1` functions. Inputs outside the boundary are
/// clamped before evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    variable: usize,
    degree: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Cubic by default in callers; interior knots sit at equally spaced
    /// quantiles of `values`, boundaries at the observed extremes.
    pub fn build(variable: usize, values: &[f64], num_functions: usize, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument("spline degree must be at least 1".into()));
        }
        if num_functions < degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "{num_functions} basis functions cannot carry degree {degree}"
            )));
        }
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lower, upper) = match (sorted.first(), sorted.last()) {
            (Some(&lo), Some(&hi)) if lo < hi => (lo, hi),
            _ => return Err(Error::ConstantColumn(variable)),
        };
        let interior_count = num_functions - degree - 1;
        let interior = (1..=interior_count)
            .map(|k| quantile_sorted(&sorted, k as f64 / (interior_count + 1) as f64))
            .collect();
        Ok(Self::from_knots(variable, degree, lower, upper, interior))
    }

    pub fn from_knots(variable: usize, degree: usize, lower: f64, upper: f64, interior: Vec<f64>) -> Self {
        let mut knots = vec![lower; degree + 1];
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(upper, degree + 1));
        Self {
            variable,
            degree,
            knots,
        }
    }

    pub fn variable(&self) -> usize {
        self.variable
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    pub fn num_functions(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// All `num_functions` basis values at `z`.
    pub fn evaluate(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_functions()];
        self.evaluate_into(z, &mut out);
        out
    }

    pub fn evaluate_into(&self, z: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let u = z.clamp(self.lower(), self.upper());
        let p = self.degree;
        let span = self.find_span(u);
        let local = self.nonzero_functions(span, u);
        out[span - p..=span].copy_from_slice(&local);
    }

    /// Largest nonempty knot span `[t_i, t_{i+1})` containing `u`; the
    /// upper boundary belongs to the last span.
    fn find_span(&self, u: f64) -> usize {
        let t = &self.knots;
        let last = self.num_functions() - 1;
        let mut span = self.degree;
        for i in self.degree..=last {
            if t[i] <= u && t[i] < t[i + 1] {
                span = i;
            }
        }
        span
    }

    /// Cox-de Boor triangle for the `degree + 1` functions nonzero on `span`.
    fn nonzero_functions(&self, span: usize, u: f64) -> Vec<f64> {
        let p = self.degree;
        let t = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - t[span + 1 - j];
            right[j] = t[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }
}

/// Linear-interpolation quantile (type 7) of sorted data.
fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let pos = prob * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// `g[k1 * N_j + k2] = b_{r,k1}(z_r) * b_{j,k2}(z_j)`.
pub fn evaluate_tensor(basis_r: &SplineBasis, basis_j: &SplineBasis, z_r: f64, z_j: f64) -> Vec<f64> {
    let br = basis_r.evaluate(z_r);
    let bj = basis_j.evaluate(z_j);
    br.iter()
        .flat_map(|a| bj.iter().map(move |b| a * b))
        .collect()
}

/// Main-effect bases for every variable plus tensor blocks for every
/// unordered pair `r < j`, laid out main blocks first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineDesign {
    bases: Vec<SplineBasis>,
    pairs: Vec<(usize, usize)>,
    blocks: Vec<std::ops::Range<usize>>,
}

impl SplineDesign {
    pub fn build(raw: &DMatrix<f64>, num_functions: usize, degree: usize) -> Result<Self> {
        let q = raw.ncols();
        let bases = (0..q)
            .map(|j| {
                let column: Vec<f64> = raw.column(j).iter().copied().collect();
                SplineBasis::build(j, &column, num_functions, degree)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bases(bases))
    }

    pub fn from_bases(bases: Vec<SplineBasis>) -> Self {
        let q = bases.len();
        let pairs: Vec<(usize, usize)> = (0..q)
            .flat_map(|r| (r + 1..q).map(move |j| (r, j)))
            .collect();
        let mut blocks = Vec::with_capacity(q + pairs.len());
        let mut start = 0;
        for b in &bases {
            blocks.push(start..start + b.num_functions());
            start += b.num_functions();
        }
        for &(r, j) in &pairs {
            let width = bases[r].num_functions() * bases[j].num_functions();
            blocks.push(start..start + width);
            start += width;
        }
        Self {
            bases,
            pairs,
            blocks,
        }
    }

    pub fn bases(&self) -> &[SplineBasis] {
        &self.bases
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn num_vars(&self) -> usize {
        self.bases.len()
    }

    /// Effect `e < q` is the main effect of variable `e`; effect `q + k` is
    /// the interaction for `pairs[k]`.
    pub fn num_effects(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[std::ops::Range<usize>] {
        &self.blocks
    }

    pub fn num_columns(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn row(&self, z: &[f64]) -> Vec<f64> {
        let marginals: Vec<Vec<f64>> = self
            .bases
            .iter()
            .map(|b| b.evaluate(z[b.variable()]))
            .collect();
        let mut row = Vec::with_capacity(self.num_columns());
        for m in &marginals {
            row.extend_from_slice(m);
        }
        for &(r, j) in &self.pairs {
            for a in &marginals[r] {
                row.extend(marginals[j].iter().map(|b| a * b));
            }
        }
        row
    }

    pub fn design(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.num_columns();
        let mut out = DMatrix::zeros(raw.nrows(), p);
        for i in 0..raw.nrows() {
            let z: Vec<f64> = raw.row(i).iter().copied().collect();
            for (c, v) in self.row(&z).into_iter().enumerate() {
                out[(i, c)] = v;
            }
        }
        out
    }
}

/// Ridge-penalized hinge fit over the full spline design, with per-effect
/// coefficient blocks so each effect collapses to a single score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonparametricInitial {
    pub design: SplineDesign,
    pub intercept: f64,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
}

impl NonparametricInitial {
    pub fn from_fit(design: SplineDesign, fit: &L2FitResult) -> Self {
        Self {
            design,
            intercept: fit.intercept,
            alpha: fit.coefficients.clone(),
            lambda: fit.lambda,
            objective: fit.objective,
        }
    }

    pub fn alpha_block(&self, effect: usize) -> &[f64] {
        &self.alpha[self.design.blocks[effect].clone()]
    }

    /// `f̂_e` for every effect at one raw sample.
    pub fn effect_scores_row(&self, z: &[f64]) -> Vec<f64> {
        let row = self.design.row(z);
        self.scores_from_design_row(&row)
    }

    fn scores_from_design_row(&self, row: &[f64]) -> Vec<f64> {
        self.design
            .blocks
            .iter()
            .map(|range| {
                row[range.clone()]
                    .iter()
                    .zip(&self.alpha[range.clone()])
                    .map(|(b, a)| b * a)
                    .sum()
            })
            .collect()
    }

    /// `n × num_effects` matrix of effect scores.
    pub fn effect_scores(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        let design = self.design.design(raw);
        self.effect_scores_from_design(&design)
    }

    pub fn effect_scores_from_design(&self, design: &DMatrix<f64>) -> DMatrix<f64> {
        let e = self.design.num_effects();
        let mut out = DMatrix::zeros(design.nrows(), e);
        for i in 0..design.nrows() {
            let row: Vec<f64> = design.row(i).iter().copied().collect();
            for (k, s) in self.scores_from_design_row(&row).into_iter().enumerate() {
                out[(i, k)] = s;
            }
        }
        out
    }
}

/// Fits the initial nonparametric model through the SVD reduction.
pub fn fit_initial_nonparametric(
    design: SplineDesign,
    raw: &DMatrix<f64>,
    labels: &[f64],
    lambda: f64,
) -> Result<NonparametricInitial> {
    let b = design.design(raw);
    let fit = fit_l2_svm_svd_reduced(&b, labels, lambda)?;
    Ok(NonparametricInitial::from_fit(design, &fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spread(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 37) % n) as f64 / n as f64 * 4.0 - 2.0).collect()
    }

    #[test]
    fn five_cubic_functions_have_one_interior_knot_at_the_median() {
        let values = [3.0, -1.0, 0.5, 2.0, 7.0, 1.0, 4.0];
        let b = SplineBasis::build(0, &values, 5, 3).unwrap();
        assert_eq!(b.num_functions(), 5);
        assert_eq!(b.interior_knots(), &[2.0]);
        assert_eq!((b.lower(), b.upper()), (-1.0, 7.0));
    }

    #[test]
    fn constant_column_rejected() {
        assert!(matches!(
            SplineBasis::build(3, &[1.0, 1.0, 1.0], 5, 3),
            Err(Error::ConstantColumn(3))
        ));
        assert!(SplineBasis::build(0, &[1.0, 2.0], 3, 3).is_err());
    }

    #[test]
    fn partition_of_unity_nonnegativity_and_local_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (nf, deg) in [(5, 3), (8, 3), (4, 1), (6, 2)] {
            let b = SplineBasis::build(0, &spread(50), nf, deg).unwrap();
            for _ in 0..100 {
                let z = rng.random_range(b.lower()..b.upper());
                let v = b.evaluate(z);
                let sum: f64 = v.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
                assert!(v.iter().all(|&x| x >= 0.0));
                assert!(v.iter().filter(|&&x| x != 0.0).count() <= deg + 1);
            }
        }
    }

    #[test]
    fn evaluation_clamps_outside_training_range() {
        let b = SplineBasis::build(0, &spread(40), 5, 3).unwrap();
        assert_eq!(b.evaluate(-100.0), b.evaluate(b.lower()));
        assert_eq!(b.evaluate(100.0), b.evaluate(b.upper()));
        assert_eq!(b.evaluate(b.lower())[0], 1.0);
        assert_eq!(b.evaluate(b.upper())[4], 1.0);
    }

    #[test]
    fn tensor_at_lower_corner_is_first_unit_product() {
        let br = SplineBasis::build(0, &spread(30), 5, 3).unwrap();
        let bj = SplineBasis::build(1, &spread(31), 4, 3).unwrap();
        let g = evaluate_tensor(&br, &bj, br.lower(), bj.lower());
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1.0).abs() < 1e-14);
        assert!(g[1..].iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn tensor_matches_scalar_products_and_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let br = SplineBasis::build(0, &spread(30), 5, 3).unwrap();
        let bj = SplineBasis::build(1, &spread(45), 6, 3).unwrap();
        for _ in 0..50 {
            let zr = rng.random_range(br.lower()..br.upper());
            let zj = rng.random_range(bj.lower()..bj.upper());
            let g = evaluate_tensor(&br, &bj, zr, zj);
            for k1 in 0..5 {
                for k2 in 0..6 {
                    let direct = br.evaluate(zr)[k1] * bj.evaluate(zj)[k2];
                    assert_eq!(g[k1 * 6 + k2], direct);
                }
            }
            assert!((g.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn five_variables_five_functions_give_275_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = DMatrix::from_fn(20, 5, |_, _| rng.random_range(-2.0..2.0));
        let d = SplineDesign::build(&raw, 5, 3).unwrap();
        assert_eq!(d.num_columns(), 5 * 5 + 10 * 25);
        assert_eq!(d.num_effects(), 15);
        assert_eq!(d.design(&raw).ncols(), 275);
    }
}
