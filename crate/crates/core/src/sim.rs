//! Logistic simulation models with AR(1)-correlated Gaussian covariates.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::splines::SplineBasis;

/// Boundary knot of the population spline bases: the standard normal
/// quantile with two-sided tail mass `1e-5`.
pub const POPULATION_BOUNDARY: f64 = 4.417_173_413_467_605;
/// Upper tertile of the standard normal; the population bases put interior
/// knots at `±` this value.
pub const NORMAL_TERTILE: f64 = 0.430_727_299_295_457_3;

const EX4_F1: [f64; 5] = [2.1, -2.9, 0.3, 2.7, -0.1];
const EX4_F2: [f64; 5] = [-2.8, -1.2, 1.8, 1.7, -0.8];
const EX4_F12: [f64; 25] = [
    -2.4, -0.1, 0.6, 3.0, 2.8, -0.9, 0.3, 1.0, -0.9, -1.3, 0.9, 2.3, 1.9, 0.8, -0.2, 1.2, 2.1, 1.0, -0.8, -1.7,
    -0.8, -1.2, 2.1, -2.8, 0.1,
];
const EX5_F1: [f64; 5] = [3.0, -2.5, 2.0, -1.5, 1.0];
const EX5_F2: [f64; 5] = [1.5, 2.0, -3.0, -2.5, -2.0];
const EX5_F15: [f64; 25] = [
    7.1, -9.8, 1.1, 9.0, -0.3, -8.1, -0.4, 2.0, 10.0, 9.4, -3.1, 1.0, 3.2, -3.1, -4.3, 3.1, 7.7, 6.2, 2.7, -0.7,
    3.9, 6.8, 3.4, -2.5, -5.6,
];
const EX5_F23: [f64; 25] = [
    -2.6, -3.8, 7.0, -9.4, 0.5, -9.2, -4.0, 6.1, 5.6, -2.7, 5.5, 9.3, -5.4, 9.1, -2.8, 5.1, 3.9, 6.6, -0.6, 6.8,
    0.8, 8.0, -3.6, -2.5, -6.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Example {
    /// `2z_1 + 4z_3 + 3z_1z_3 + 1` over seven variables (strong heredity).
    One,
    /// `3.5z_1 + 3z_1z_2 + 2.5z_1z_3 + 2z_1z_4 + 1.5z_1z_5 + z_1z_6 + 1`
    /// over seven variables (weak heredity).
    Two,
    /// `3z_1 + 2.5z_2 + 2z_3z_4 + 1.5z_4z_5 + 1` over five variables (no
    /// heredity).
    Three,
    /// `f_1(z_1) + f_2(z_2) + f_12(z_1, z_2) + 1` over five variables.
    Four,
    /// `f_1(z_1) + f_2(z_2) + f_15(z_1, z_5) + f_23(z_2, z_3) - 1` over five
    /// variables.
    Five,
}

impl TryFrom<u8> for Example {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Ok(match v {
            1 => Example::One,
            2 => Example::Two,
            3 => Example::Three,
            4 => Example::Four,
            5 => Example::Five,
            _ => return Err(format!("unknown example {v}; expected 1..=5")),
        })
    }
}

impl From<Example> for u8 {
    fn from(e: Example) -> u8 {
        match e {
            Example::One => 1,
            Example::Two => 2,
            Example::Three => 3,
            Example::Four => 4,
            Example::Five => 5,
        }
    }
}

impl Example {
    pub fn num_vars(self) -> usize {
        match self {
            Example::One | Example::Two => 7,
            _ => 5,
        }
    }

    pub fn is_nonparametric(self) -> bool {
        matches!(self, Example::Four | Example::Five)
    }
}

/// Cubic basis with interior knots at the normal tertiles and boundary
/// knots at `±POPULATION_BOUNDARY`: six functions, of which the first is
/// dropped, leaving the five that carry the model coefficients.
pub fn population_basis(variable: usize) -> SplineBasis {
    SplineBasis::from_knots(
        variable,
        3,
        -POPULATION_BOUNDARY,
        POPULATION_BOUNDARY,
        vec![-NORMAL_TERTILE, NORMAL_TERTILE],
    )
}

/// The five population basis functions at `z`.
pub fn population_functions(basis: &SplineBasis, z: f64) -> Vec<f64> {
    basis.evaluate(z)[1..].to_vec()
}

fn population_tensor(basis: &SplineBasis, zr: f64, zj: f64) -> Vec<f64> {
    let br = population_functions(basis, zr);
    let bj = population_functions(basis, zj);
    br.iter().flat_map(|a| bj.iter().map(move |b| a * b)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct LogisticModelSpec {
    pub example: Example,
    pub rho: f64,
    basis: SplineBasis,
}

impl LogisticModelSpec {
    pub fn new(example: Example, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (-1, 1), got {rho}")));
        }
        Ok(Self {
            example,
            rho,
            basis: population_basis(0),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.example.num_vars()
    }

    /// Log-odds of `y = +1` at `z`.
    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        match self.example {
            Example::One => 2.0 * z[0] + 4.0 * z[2] + 3.0 * z[0] * z[2] + 1.0,
            Example::Two => {
                3.5 * z[0]
                    + z[0] * (3.0 * z[1] + 2.5 * z[2] + 2.0 * z[3] + 1.5 * z[4] + z[5])
                    + 1.0
            }
            Example::Three => 3.0 * z[0] + 2.5 * z[1] + 2.0 * z[2] * z[3] + 1.5 * z[3] * z[4] + 1.0,
            Example::Four => {
                let b = &self.basis;
                dot(&population_functions(b, z[0]), &EX4_F1)
                    + dot(&population_functions(b, z[1]), &EX4_F2)
                    + dot(&population_tensor(b, z[0], z[1]), &EX4_F12)
                    + 1.0
            }
            Example::Five => {
                let b = &self.basis;
                dot(&population_functions(b, z[0]), &EX5_F1)
                    + dot(&population_functions(b, z[1]), &EX5_F2)
                    + dot(&population_tensor(b, z[0], z[4]), &EX5_F15)
                    + dot(&population_tensor(b, z[1], z[2]), &EX5_F23)
                    - 1.0
            }
        }
    }

    pub fn probability(&self, z: &[f64]) -> f64 {
        logistic(self.linear_predictor(z))
    }

    /// Fills `z` with one AR(1) draw: `z_1 = e_1`,
    /// `z_j = ρ z_{j-1} + √(1-ρ²) e_j`.
    pub fn draw_covariates<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64]) {
        let s = (1.0 - self.rho * self.rho).sqrt();
        for j in 0..z.len() {
            let e: f64 = rng.sample(StandardNormal);
            z[j] = if j == 0 { e } else { self.rho * z[j - 1] + s * e };
        }
    }

    /// `n` labeled samples with raw covariates as columns.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let q = self.num_vars();
        let mut x = DMatrix::zeros(n, q);
        let mut y = Vec::with_capacity(n);
        let mut z = vec![0.0; q];
        for i in 0..n {
            self.draw_covariates(rng, &mut z);
            for j in 0..q {
                x[(i, j)] = z[j];
            }
            let u: f64 = rng.random();
            y.push(if u < self.probability(&z) { 1.0 } else { -1.0 });
        }
        Dataset::new(x, y).expect("generated samples are finite and labeled ±1")
    }
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Generator for `(seed, stream)`; streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream reserved for the Monte-Carlo Bayes estimate.
pub const BAYES_STREAM: u64 = u64::MAX;

pub fn generate_example(spec: &LogisticModelSpec, n: usize, seed: u64) -> Dataset {
    spec.generate(n, &mut stream_rng(seed, 0))
}

/// Monte-Carlo mean of `min(p(z), 1 - p(z))`.
pub fn bayes_error(spec: &LogisticModelSpec, mc_samples: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, BAYES_STREAM);
    let mut z = vec![0.0; spec.num_vars()];
    let mut total = 0.0;
    for _ in 0..mc_samples {
        spec.draw_covariates(&mut rng, &mut z);
        let p = spec.probability(&z);
        total += p.min(1.0 - p);
    }
    total / mc_samples.max(1) as f64
}
