//! Simulation benchmark with oracle tuning: every method is fitted across
//! its grid on each replicate and scored by its smallest test error.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{active_effects, generalization_error, mean_and_se, select_initial_lambda};
use crate::expand::BasisExpansion;
use crate::heredity::{HeredityGraph, HeredityPolicy};
use crate::predict::LinearClassifier;
use crate::sim::{bayes_error, stream_rng, Example, LogisticModelSpec};
use crate::splines::{NonparametricInitial, SplineDesign};
use crate::structured::{
    fit_scores, fit_structured, garrote_lambda_max, parametric_scores, Penalty, StructuredFitResult,
    StructuredFitSpec,
};
use crate::svm_l1::{fit_l1_svm, lambda_max, L1FitResult};
use crate::svm_l2::{fit_l2_svm, fit_l2_svm_svd_reduced, initial_lambda_grid, log_grid};
use crate::lp::SolverOptions;

/// Tolerance for counting heredity violations among structured fits.
pub const COMPLIANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    L2,
    L1,
    Garrote,
    Shsvm,
    Whsvm,
    NpShsvm,
    NpWhsvm,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::L2,
        Method::L1,
        Method::Garrote,
        Method::Shsvm,
        Method::Whsvm,
        Method::NpShsvm,
        Method::NpWhsvm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::L2 => "l2",
            Method::L1 => "l1",
            Method::Garrote => "garrote",
            Method::Shsvm => "shsvm",
            Method::Whsvm => "whsvm",
            Method::NpShsvm => "np-shsvm",
            Method::NpWhsvm => "np-whsvm",
        }
    }

    /// Row label in tabular reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::L2 => "l2 SVM",
            Method::L1 => "l1 SVM",
            Method::Garrote => "garrote SVM",
            Method::Shsvm => "SHSVM",
            Method::Whsvm => "WHSVM",
            Method::NpShsvm => "NP-SHSVM",
            Method::NpWhsvm => "NP-WHSVM",
        }
    }

    /// Heredity policy of a garrote-type method.
    pub fn policy(self) -> Option<HeredityPolicy> {
        match self {
            Method::Garrote => Some(HeredityPolicy::None),
            Method::Shsvm | Method::NpShsvm => Some(HeredityPolicy::Strong),
            Method::Whsvm | Method::NpWhsvm => Some(HeredityPolicy::Weak),
            Method::L2 | Method::L1 => None,
        }
    }

    pub fn is_nonparametric(self) -> bool {
        matches!(self, Method::NpShsvm | Method::NpWhsvm)
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

fn default_n_test() -> usize {
    2000
}
fn default_grid_size() -> usize {
    30
}
fn default_bayes_mc() -> usize {
    1_000_000
}
fn default_basis_functions() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub example: Example,
    pub rho: f64,
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_bayes_mc")]
    pub bayes_mc_samples: usize,
    /// Spline functions per variable for the nonparametric examples.
    #[serde(default = "default_basis_functions")]
    pub basis_functions: usize,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_train < 10 || self.n_test == 0 || self.replications == 0 || self.grid_size == 0 {
            return bad("n_train ≥ 10, n_test ≥ 1, replications ≥ 1 and grid_size ≥ 1 are required".into());
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        for m in &self.methods {
            let np = self.example.is_nonparametric();
            let ok = match m {
                Method::L2 => true,
                Method::NpShsvm | Method::NpWhsvm => np,
                _ => !np,
            };
            if !ok {
                return bad(format!(
                    "method {} does not apply to example {}",
                    m.as_str(),
                    u8::from(self.example)
                ));
            }
        }
        LogisticModelSpec::new(self.example, self.rho).map(|_| ())
    }
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub best_error: f64,
    pub best_tuning: f64,
    /// Test error at every grid value, in grid order.
    pub grid_errors: Vec<f64>,
    /// Effect-level selection at the chosen tuning value.
    pub selected_effects: Vec<bool>,
    pub strong_compliant: bool,
    pub weak_compliant: bool,
    pub fits_checked: usize,
    pub heredity_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub initial_lambda: Option<f64>,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub name: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub errors: Vec<f64>,
    pub tuning: Vec<f64>,
    /// Replicates whose chosen fit obeys strong (resp. weak) heredity.
    pub strong_heredity_count: usize,
    pub weak_heredity_count: usize,
    pub fits_checked: usize,
    pub heredity_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub version: String,
    pub config: BenchmarkConfig,
    pub bayes_error: f64,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
    pub initial_lambdas: Vec<Option<f64>>,
}

impl BenchmarkReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }

    /// `√(se_a² + se_b²)`.
    pub fn pooled_se(&self, a: Method, b: Method) -> Option<f64> {
        let (sa, sb) = (self.summary(a)?, self.summary(b)?);
        Some((sa.std_error.powi(2) + sb.std_error.powi(2)).sqrt())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per method plus a Bayes row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mean_error,std_error,strong_frequency,weak_frequency\n");
        for s in &self.methods {
            let (strong, weak) = if s.method == Method::L1 {
                (
                    format!("{}/{}", s.strong_heredity_count, self.replications),
                    format!("{}/{}", s.weak_heredity_count, self.replications),
                )
            } else {
                (String::new(), String::new())
            };
            let _ = writeln!(out, "{},{:.6},{:.6},{},{}", s.name, s.mean_error, s.std_error, strong, weak);
        }
        let _ = writeln!(out, "Bayes,{:.6},,,", self.bayes_error);
        out
    }
}

/// `count` evenly spaced values ending at `hi`, starting at `hi / count`.
pub fn linear_grid(hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| hi * k as f64 / count as f64).collect()
}

/// `λ_max · 10^t` for `t` evenly spaced over `[-4, 0]`.
pub fn relative_lambda_grid(lambda_max: f64, count: usize) -> Vec<f64> {
    log_grid(lambda_max * 1e-4, lambda_max, count)
}

/// First index of the smallest error; with `prefer_last`, the last one.
fn argmin(errors: &[f64], prefer_last: bool) -> usize {
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate() {
        if e < errors[best] || (prefer_last && e == errors[best]) {
            best = i;
        }
    }
    best
}

/// Prepared data of one replicate.
struct Problem {
    train: Dataset,
    test_x: DMatrix<f64>,
    test_y: Vec<f64>,
    ranges: Vec<std::ops::Range<usize>>,
    graph: HeredityGraph,
    spline: Option<SplineDesign>,
}

fn prepare(config: &BenchmarkConfig, spec: &LogisticModelSpec, index: usize) -> Result<Problem> {
    let mut rng = stream_rng(config.seed, index as u64);
    let raw_train = spec.generate(config.n_train, &mut rng);
    let raw_test = spec.generate(config.n_test, &mut rng);
    if !raw_train.has_both_classes() {
        return Err(Error::SingleClassData);
    }
    if config.example.is_nonparametric() {
        let design = SplineDesign::build(raw_train.x(), config.basis_functions, 3)?;
        let (expansion, graph) = BasisExpansion::from_spline_design(design.clone());
        let train = Dataset::new(design.design(raw_train.x()), raw_train.y().to_vec())?;
        Ok(Problem {
            test_x: design.design(raw_test.x()),
            test_y: raw_test.y().to_vec(),
            train,
            ranges: expansion.column_ranges().to_vec(),
            graph,
            spline: Some(design),
        })
    } else {
        let (expansion, graph) = BasisExpansion::polynomial(raw_train.x(), true)?;
        let train = Dataset::new(expansion.transform(raw_train.x())?, raw_train.y().to_vec())?;
        Ok(Problem {
            test_x: expansion.transform(raw_test.x())?,
            test_y: raw_test.y().to_vec(),
            train,
            ranges: expansion.column_ranges().to_vec(),
            graph,
            spline: None,
        })
    }
}

fn outcome(
    method: Method,
    grid: &[f64],
    errors: Vec<f64>,
    best: usize,
    selected: Vec<bool>,
    graph: &HeredityGraph,
    checked: (usize, usize),
) -> MethodOutcome {
    MethodOutcome {
        method,
        best_error: errors[best],
        best_tuning: grid[best],
        grid_errors: errors,
        strong_compliant: graph.selection_complies(&selected, HeredityPolicy::Strong),
        weak_compliant: graph.selection_complies(&selected, HeredityPolicy::Weak),
        selected_effects: selected,
        fits_checked: checked.0,
        heredity_violations: checked.1,
    }
}

fn run_l2(config: &BenchmarkConfig, pb: &Problem) -> Result<MethodOutcome> {
    let grid = initial_lambda_grid(pb.train.n(), pb.train.p(), config.grid_size);
    let mut errors = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let fit = if pb.spline.is_some() {
            fit_l2_svm_svd_reduced(pb.train.x(), pb.train.y(), lambda)?
        } else {
            fit_l2_svm(&pb.train, lambda)?
        };
        errors.push(generalization_error(&fit.decision_values(&pb.test_x)?, &pb.test_y));
    }
    let best = argmin(&errors, false);
    let selected = vec![true; pb.ranges.len()];
    Ok(outcome(Method::L2, &grid, errors, best, selected, &pb.graph, (0, 0)))
}

fn run_l1(config: &BenchmarkConfig, pb: &Problem) -> Result<(MethodOutcome, L1FitResult)> {
    let grid = relative_lambda_grid(lambda_max(&pb.train), config.grid_size);
    let mut errors = Vec::with_capacity(grid.len());
    let mut fits = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let fit = fit_l1_svm(&pb.train, lambda)?;
        errors.push(generalization_error(&fit.decision_values(&pb.test_x)?, &pb.test_y));
        fits.push(fit);
    }
    // Equal test errors: keep the sparser, larger-λ fit.
    let best = argmin(&errors, true);
    let selected = active_effects(&fits[best].coefficients, &pb.ranges);
    let fit = fits.swap_remove(best);
    Ok((outcome(Method::L1, &grid, errors, best, selected, &pb.graph, (0, 0)), fit))
}

fn check_fit(fit: &StructuredFitResult, graph: &HeredityGraph, policy: HeredityPolicy) -> usize {
    let theta_negative = fit.theta.iter().any(|&t| t < -1e-9);
    usize::from(theta_negative || !graph.theta_violations(&fit.theta, policy, COMPLIANCE_TOL).is_empty())
}

fn theta_selection(theta: &[f64]) -> Vec<bool> {
    theta.iter().map(|&t| t > crate::svm_l1::ZERO_TOL).collect()
}

fn run_garrote_family(
    config: &BenchmarkConfig,
    pb: &Problem,
    methods: &[Method],
    replicate_seed: u64,
) -> Result<(f64, Vec<MethodOutcome>)> {
    let cv = select_initial_lambda(&pb.train, replicate_seed)?;
    let lambda0 = cv.best_tuning;
    let mut out = Vec::new();
    if let Some(design) = &pb.spline {
        let fit0 = fit_l2_svm_svd_reduced(pb.train.x(), pb.train.y(), lambda0)?;
        let initial = NonparametricInitial::from_fit(design.clone(), &fit0);
        let s_train = initial.effect_scores_from_design(pb.train.x());
        let s_test = initial.effect_scores_from_design(&pb.test_x);
        let options = SolverOptions::default();
        for &m in methods {
            let policy = m.policy().expect("garrote-type method");
            let graph = pb.graph.clone().with_policy(policy);
            // The budget that an unconstrained fit would use bounds the grid.
            let free = fit_scores(&s_train, pb.train.y(), &graph, Penalty::Constraint(f64::INFINITY), &options)?;
            let hi = free.theta.iter().sum::<f64>().max(graph.num_effects() as f64);
            let grid = linear_grid(hi, config.grid_size);
            let mut errors = Vec::with_capacity(grid.len());
            let mut selections = Vec::with_capacity(grid.len());
            let mut checked = (0, 0);
            for &big_m in &grid {
                let fit = fit_scores(&s_train, pb.train.y(), &graph, Penalty::Constraint(big_m), &options)?;
                checked.0 += 1;
                checked.1 += check_fit(&fit, &graph, policy);
                errors.push(generalization_error(&fit.decision_values(&s_test)?, &pb.test_y));
                selections.push(theta_selection(&fit.theta));
            }
            let best = argmin(&errors, false);
            let selected = selections.swap_remove(best);
            out.push(outcome(m, &grid, errors, best, selected, &graph, checked));
        }
    } else {
        let fit0 = fit_l2_svm(&pb.train, lambda0)?;
        let scores = parametric_scores(pb.train.x(), &fit0.coefficients, &pb.ranges)?;
        let grid = relative_lambda_grid(garrote_lambda_max(&scores), config.grid_size);
        for &m in methods {
            let policy = m.policy().expect("garrote-type method");
            let spec_base = StructuredFitSpec {
                initial: fit0.coefficients.clone(),
                column_ranges: pb.ranges.clone(),
                graph: pb.graph.clone().with_policy(policy),
                penalty: Penalty::Lagrangian(0.0),
            };
            let mut errors = Vec::with_capacity(grid.len());
            let mut selections = Vec::with_capacity(grid.len());
            let mut checked = (0, 0);
            for &lambda in &grid {
                let spec = StructuredFitSpec {
                    penalty: Penalty::Lagrangian(lambda),
                    ..spec_base.clone()
                };
                let fit = fit_structured(&pb.train, &spec)?;
                checked.0 += 1;
                checked.1 += check_fit(&fit, &spec.graph, policy);
                errors.push(generalization_error(&fit.decision_values(&pb.test_x)?, &pb.test_y));
                selections.push(theta_selection(&fit.theta));
            }
            let best = argmin(&errors, false);
            let selected = selections.swap_remove(best);
            out.push(outcome(m, &grid, errors, best, selected, &spec_base.graph, checked));
        }
    }
    Ok((lambda0, out))
}

/// Runs every configured method on replicate `index`.
pub fn run_replicate(config: &BenchmarkConfig, index: usize) -> Result<ReplicateResult> {
    let spec = LogisticModelSpec::new(config.example, config.rho)?;
    let pb = prepare(config, &spec, index)?;
    let garrote: Vec<Method> = config.methods.iter().copied().filter(|m| m.policy().is_some()).collect();
    let mut by_method = Vec::new();
    let mut initial_lambda = None;
    if !garrote.is_empty() {
        let replicate_seed = config.seed.wrapping_add(index as u64);
        let (l0, outs) = run_garrote_family(config, &pb, &garrote, replicate_seed)?;
        initial_lambda = Some(l0);
        by_method.extend(outs);
    }
    for &m in &config.methods {
        match m {
            Method::L2 => by_method.push(run_l2(config, &pb)?),
            Method::L1 => by_method.push(run_l1(config, &pb)?.0),
            _ => {}
        }
    }
    let outcomes = config
        .methods
        .iter()
        .map(|m| {
            by_method
                .iter()
                .find(|o| o.method == *m)
                .cloned()
                .expect("every method produced an outcome")
        })
        .collect();
    Ok(ReplicateResult {
        index,
        initial_lambda,
        outcomes,
    })
}

/// Runs all replicates in parallel and aggregates them in replicate order.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let spec = LogisticModelSpec::new(config.example, config.rho)?;
    let replicates: Vec<ReplicateResult> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            run_replicate(config, r).inspect_err(|e| log::error!("replicate {r} failed: {e}"))
        })
        .collect::<Result<_>>()?;
    let bayes = bayes_error(&spec, config.bayes_mc_samples, config.seed);
    Ok(aggregate(config, bayes, &replicates))
}

pub fn aggregate(config: &BenchmarkConfig, bayes: f64, replicates: &[ReplicateResult]) -> BenchmarkReport {
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let outs: Vec<&MethodOutcome> = replicates.iter().map(|r| &r.outcomes[k]).collect();
            let errors: Vec<f64> = outs.iter().map(|o| o.best_error).collect();
            let (mean_error, std_error) = mean_and_se(&errors);
            MethodSummary {
                method: m,
                name: m.display_name().to_string(),
                mean_error,
                std_error,
                tuning: outs.iter().map(|o| o.best_tuning).collect(),
                errors,
                strong_heredity_count: outs.iter().filter(|o| o.strong_compliant).count(),
                weak_heredity_count: outs.iter().filter(|o| o.weak_compliant).count(),
                fits_checked: outs.iter().map(|o| o.fits_checked).sum(),
                heredity_violations: outs.iter().map(|o| o.heredity_violations).sum(),
            }
        })
        .collect();
    BenchmarkReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        bayes_error: bayes,
        replications: replicates.len(),
        seed: config.seed,
        methods,
        initial_lambdas: replicates.iter().map(|r| r.initial_lambda).collect(),
    }
}
