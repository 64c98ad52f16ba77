//! Training on a CSV dataset and the saved model artifact.

use heredity_svm::bench::{linear_grid, relative_lambda_grid, Method};
use heredity_svm::eval::{kfold_cv, select_initial_lambda, CvCriterion, CvReport};
use heredity_svm::expand::{BasisExpansion, EffectDescriptor, EffectKind, RawVariable};
use heredity_svm::heredity::HeredityGraph;
use heredity_svm::lp::SolverOptions;
use heredity_svm::predict::{nonparametric_model, LinearClassifier, LinearModel};
use heredity_svm::splines::NonparametricInitial;
use heredity_svm::structured::{fit_scores, garrote_lambda_max, parametric_scores, Penalty};
use heredity_svm::svm_l1::{fit_l1_svm, lambda_max, ZERO_TOL};
use heredity_svm::svm_l2::{fit_l2_svm, fit_l2_svm_svd_reduced, initial_lambda_grid, log_grid};
use heredity_svm::{Dataset, Error as CoreError};
use serde::{Deserialize, Serialize};

use crate::data::CsvDataset;
use crate::error::{CliError, CliResult};

/// Bumped whenever the artifact layout changes incompatibly.
pub const ARTIFACT_FORMAT: u32 = 1;

/// Tuning-grid size when `--cv` is given without `--grid`.
pub const DEFAULT_GRID_SIZE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    Lambda(f64),
    BigM(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TuningChoice {
    Fixed(Tuning),
    /// `k`-fold CV over `grid`, or over the method's default grid.
    Cv { folds: usize, grid: Option<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub method: Method,
    pub tuning: TuningChoice,
    pub seed: u64,
    /// `λ` of the initial ridge fit; chosen by 5-fold CV when absent.
    pub initial_lambda: Option<f64>,
    pub quadratic: bool,
    pub basis_functions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRecord {
    pub folds: usize,
    pub grid: Vec<f64>,
    pub errors: Vec<f64>,
    pub hinge: Vec<f64>,
}

impl CvRecord {
    fn from_report(report: &CvReport, folds: usize, grid: &[f64]) -> Self {
        Self {
            folds,
            grid: grid.to_vec(),
            errors: report.errors.clone(),
            hinge: report.hinge.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialEstimator {
    Parametric { lambda: f64, coefficients: Vec<f64> },
    Nonparametric(NonparametricInitial),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub package_version: String,
    pub method: Method,
    pub tuning: Tuning,
    pub cv: Option<CvRecord>,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub variables: Vec<RawVariable>,
    pub expansion: BasisExpansion,
    pub graph: HeredityGraph,
    pub initial: Option<InitialEstimator>,
    pub theta: Option<Vec<f64>>,
    pub intercept: f64,
    /// Weights over the expanded (standardized or spline) columns.
    pub weights: Vec<f64>,
    pub active_effects: Vec<String>,
    pub training_hinge: f64,
}

/// `log:LO:HI:COUNT`, `lin:LO:HI:COUNT`, or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| -> Result<f64, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(format!("grid value `{s}` must be finite and nonnegative"))
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [kind @ ("log" | "lin"), lo, hi, count] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let count: usize = count.trim().parse().map_err(|_| format!("`{count}` is not a count"))?;
            if count == 0 || lo > hi {
                return Err(format!("grid `{spec}` needs count ≥ 1 and LO ≤ HI"));
            }
            if *kind == "log" {
                if lo <= 0.0 {
                    return Err("log grids need LO > 0".into());
                }
                log_grid(lo, hi, count)
            } else if count == 1 {
                vec![hi]
            } else {
                (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
            }
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("cannot parse grid `{spec}`")),
    };
    if grid.is_empty() {
        return Err("empty grid".into());
    }
    Ok(grid)
}

pub fn effect_label(effect: &EffectDescriptor, names: &[String]) -> String {
    let n = |k: usize| names[effect.source_vars[k]].as_str();
    match effect.kind {
        EffectKind::Main | EffectKind::SplineMain => n(0).to_string(),
        EffectKind::Interaction | EffectKind::SplineInteraction => format!("{}*{}", n(0), n(1)),
        EffectKind::Quadratic => format!("{}^2", n(0)),
    }
}

fn hinge_total(decisions: &[f64], y: &[f64]) -> f64 {
    decisions.iter().zip(y).map(|(f, yi)| (1.0 - yi * f).max(0.0)).sum()
}

/// CV over `grid` (misclassification, ties to the smaller hinge loss) and
/// the chosen value.
fn cross_validate<F>(data: &Dataset, grid: &[f64], folds: usize, seed: u64, fit: F) -> CliResult<(f64, CvRecord)>
where
    F: Fn(&Dataset, f64) -> heredity_svm::Result<LinearModel>,
{
    let report = kfold_cv(data, grid, folds, seed, CvCriterion::Misclassification, |train, test_x, t| {
        fit(train, t)?.decision_values(test_x)
    })?;
    Ok((report.best_tuning, CvRecord::from_report(&report, folds, grid)))
}

/// Resolves the tuning value: fixed, or by CV over `grid` (defaulting to
/// `default_grid`). `as_tuning` wraps a grid value.
fn resolve<F>(
    choice: &TuningChoice,
    data: &Dataset,
    seed: u64,
    default_grid: impl FnOnce() -> Vec<f64>,
    as_tuning: fn(f64) -> Tuning,
    fit: F,
) -> CliResult<(Tuning, Option<CvRecord>)>
where
    F: Fn(&Dataset, f64) -> heredity_svm::Result<LinearModel>,
{
    match choice {
        TuningChoice::Fixed(t) => Ok((*t, None)),
        TuningChoice::Cv { folds, grid } => {
            let grid = grid.clone().unwrap_or_else(default_grid);
            let (best, record) = cross_validate(data, &grid, *folds, seed, fit)?;
            Ok((as_tuning(best), Some(record)))
        }
    }
}

fn lambda_only(t: Tuning, method: Method) -> CliResult<f64> {
    match t {
        Tuning::Lambda(l) => Ok(l),
        Tuning::BigM(_) => Err(CliError::Usage(format!(
            "--big-m applies to garrote-type methods, not {}",
            method.as_str()
        ))),
    }
}

fn penalty_of(t: Tuning) -> Penalty {
    match t {
        Tuning::Lambda(l) => Penalty::Lagrangian(l),
        Tuning::BigM(m) => Penalty::Constraint(m),
    }
}

pub fn train(data: &CsvDataset, variables: &[RawVariable], opts: &TrainOptions) -> CliResult<ModelArtifact> {
    let y = data.require_labels()?.to_vec();
    data.check_levels(variables)?;
    let method = opts.method;
    let (expansion, graph) = if method.is_nonparametric() {
        if variables.iter().any(|v| *v != RawVariable::Continuous) {
            return Err(CliError::Usage("nonparametric methods need continuous columns only".into()));
        }
        BasisExpansion::splines(&data.features, opts.basis_functions, 3)?
    } else {
        BasisExpansion::with_dummies(&data.features, variables, opts.quadratic, Some(&data.names))?
    };
    let design = Dataset::new(expansion.transform(&data.features)?, y.clone())?;
    if !design.has_both_classes() {
        return Err(CoreError::SingleClassData.into());
    }
    let (n, p) = (design.n(), design.p());
    let seed = opts.seed;

    let mut initial = None;
    let mut theta = None;
    let (tuning, cv, model, active) = match method.policy() {
        None if method == Method::L2 => {
            let (t, cv) = resolve(&opts.tuning, &design, seed, || initial_lambda_grid(n, p, DEFAULT_GRID_SIZE), Tuning::Lambda, |d, l| {
                let f = fit_l2_svm(d, l)?;
                Ok(LinearModel { intercept: f.intercept, weights: f.coefficients })
            })?;
            let fit = fit_l2_svm(&design, lambda_only(t, method)?)?;
            let model = LinearModel { intercept: fit.intercept, weights: fit.coefficients };
            let active = active_by_weights(&model.weights, &expansion);
            (t, cv, model, active)
        }
        None => {
            let (t, cv) = resolve(
                &opts.tuning,
                &design,
                seed,
                || relative_lambda_grid(lambda_max(&design), DEFAULT_GRID_SIZE),
                Tuning::Lambda,
                |d, l| {
                    let f = fit_l1_svm(d, l)?;
                    Ok(LinearModel { intercept: f.intercept, weights: f.coefficients })
                },
            )?;
            let fit = fit_l1_svm(&design, lambda_only(t, method)?)?;
            let model = LinearModel { intercept: fit.intercept, weights: fit.coefficients };
            let active = active_by_weights(&model.weights, &expansion);
            (t, cv, model, active)
        }
        Some(policy) => {
            let lambda0 = match opts.initial_lambda {
                Some(l) => l,
                None => select_initial_lambda(&design, seed)?.best_tuning,
            };
            let graph = graph.clone().with_policy(policy);
            let ranges = expansion.column_ranges().to_vec();
            let (scores, init) = if method.is_nonparametric() {
                let sd = expansion.spline_design().expect("spline expansion").clone();
                let fit0 = fit_l2_svm_svd_reduced(design.x(), &y, lambda0)?;
                let init = NonparametricInitial::from_fit(sd, &fit0);
                (init.effect_scores_from_design(design.x()), InitialEstimator::Nonparametric(init))
            } else {
                let fit0 = fit_l2_svm(&design, lambda0)?;
                let scores = parametric_scores(design.x(), &fit0.coefficients, &ranges)?;
                let init = InitialEstimator::Parametric { lambda: lambda0, coefficients: fit0.coefficients };
                (scores, init)
            };
            let score_data = Dataset::new(scores.clone(), y.clone())?;
            let options = SolverOptions::default();
            let fit_at = |d: &Dataset, t: Tuning| fit_scores(d.x(), d.y(), &graph, penalty_of(t), &options);
            let (t, cv) = if method.is_nonparametric() {
                let default_grid = || {
                    // Grid up to the budget an unconstrained fit would use.
                    let free = fit_scores(&scores, &y, &graph, Penalty::Constraint(f64::INFINITY), &options);
                    let used = free.map(|f| f.theta.iter().sum::<f64>()).unwrap_or(0.0);
                    linear_grid(used.max(graph.num_effects() as f64), DEFAULT_GRID_SIZE)
                };
                resolve(&opts.tuning, &score_data, seed, default_grid, Tuning::BigM, |d, m| {
                    let f = fit_at(d, Tuning::BigM(m))?;
                    Ok(LinearModel { intercept: f.intercept, weights: f.theta })
                })?
            } else {
                let default_grid = || relative_lambda_grid(garrote_lambda_max(&scores), DEFAULT_GRID_SIZE);
                resolve(&opts.tuning, &score_data, seed, default_grid, Tuning::Lambda, |d, l| {
                    let f = fit_at(d, Tuning::Lambda(l))?;
                    Ok(LinearModel { intercept: f.intercept, weights: f.theta })
                })?
            };
            let fit = fit_at(&score_data, t)?;
            let model = match &init {
                InitialEstimator::Nonparametric(ni) => nonparametric_model(ni, &fit.theta, fit.intercept)?,
                InitialEstimator::Parametric { coefficients, .. } => {
                    let mut weights = vec![0.0; coefficients.len()];
                    for (j, r) in ranges.iter().enumerate() {
                        for c in r.clone() {
                            weights[c] = coefficients[c] * fit.theta[j];
                        }
                    }
                    LinearModel { intercept: fit.intercept, weights }
                }
            };
            let active: Vec<usize> = fit.active_effects.clone();
            initial = Some(init);
            theta = Some(fit.theta);
            (t, cv, model, active)
        }
    };
    let training_hinge = hinge_total(&model.decision_values(design.x())?, &y);
    let effects = expansion.effects();
    Ok(ModelArtifact {
        format_version: ARTIFACT_FORMAT,
        package_version: env!("CARGO_PKG_VERSION").to_string(),
        method,
        tuning,
        cv,
        seed,
        feature_names: data.names.clone(),
        variables: variables.to_vec(),
        active_effects: active.iter().map(|&e| effect_label(&effects[e], &data.names)).collect(),
        graph: graph.with_policy(method.policy().unwrap_or(heredity_svm::heredity::HeredityPolicy::None)),
        expansion,
        initial,
        theta,
        intercept: model.intercept,
        weights: model.weights,
        training_hinge,
    })
}

fn active_by_weights(weights: &[f64], expansion: &BasisExpansion) -> Vec<usize> {
    expansion
        .column_ranges()
        .iter()
        .enumerate()
        .filter(|(_, r)| (r.start..r.end).any(|c| weights[c].abs() > ZERO_TOL))
        .map(|(e, _)| e)
        .collect()
}

impl ModelArtifact {
    pub fn model(&self) -> LinearModel {
        LinearModel {
            intercept: self.intercept,
            weights: self.weights.clone(),
        }
    }

    /// Column names and order must match the training file.
    pub fn check_columns(&self, names: &[String]) -> CliResult<()> {
        if names != self.feature_names.as_slice() {
            return Err(CliError::Data(format!(
                "columns {:?} do not match the model's {:?} (names and order must agree)",
                names, self.feature_names
            )));
        }
        Ok(())
    }

    pub fn decision_values(&self, data: &CsvDataset) -> CliResult<Vec<f64>> {
        self.check_columns(&data.names)?;
        data.check_levels(&self.variables)?;
        let x = self.expansion.transform(&data.features)?;
        Ok(self.model().decision_values(&x)?)
    }

    pub fn predict(&self, data: &CsvDataset) -> CliResult<Vec<f64>> {
        Ok(self
            .decision_values(data)?
            .into_iter()
            .map(heredity_svm::predict::sign_label)
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(text).map_err(|e| CliError::Data(format!("not a model artifact: {e}")))?;
        if v.format_version != ARTIFACT_FORMAT {
            return Err(CliError::Data(format!(
                "artifact format {} is not supported (expected {ARTIFACT_FORMAT})",
                v.format_version
            )));
        }
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("malformed model artifact: {e}")))
    }
}
