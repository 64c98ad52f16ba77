//! Effect spaces built from raw explanatory variables.
//!
//! A [`BasisExpansion`] enumerates effects (main, two-way interaction,
//! quadratic, or their spline counterparts), maps each to a contiguous
//! block of design columns, and records the parent sets used by the
//! heredity constraints. Parametric columns are centered and scaled with
//! training statistics; spline columns are left on their native scale.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heredity::{HeredityGraph, HeredityPolicy};
use crate::splines::SplineDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Main,
    Interaction,
    Quadratic,
    SplineMain,
    SplineInteraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectDescriptor {
    pub id: usize,
    pub kind: EffectKind,
    pub source_vars: Vec<usize>,
    /// Set for effects built from a dummy-coded factor; the block shares
    /// one scaling parameter.
    pub group_id: Option<usize>,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawVariable {
    Continuous,
    /// Values coded `0..levels`; level 0 is the reference and gets no column.
    Categorical { levels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.iter().sum::<f64>() / n.max(1) as f64;
            let var = if n > 1 {
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let sd = var.sqrt();
            means.push(mean);
            scales.push(if sd > 1e-12 { sd } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.scales) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionTransform {
    Polynomial {
        variables: Vec<RawVariable>,
        include_quadratic: bool,
    },
    Spline(SplineDesign),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisExpansion {
    effects: Vec<EffectDescriptor>,
    column_ranges: Vec<Range<usize>>,
    transform: ExpansionTransform,
    standardizer: Option<Standardizer>,
    num_raw: usize,
}

fn default_names(q: usize) -> Vec<String> {
    (1..=q).map(|j| format!("z{j}")).collect()
}

impl BasisExpansion {
    /// All main effects, all pairwise products `z_r z_j` (`r < j`) and,
    /// optionally, all squares `z_j²`.
    pub fn polynomial(raw: &DMatrix<f64>, include_quadratic: bool) -> Result<(Self, HeredityGraph)> {
        let variables = vec![RawVariable::Continuous; raw.ncols()];
        Self::with_dummies(raw, &variables, include_quadratic, None)
    }

    /// Like [`BasisExpansion::polynomial`] with categorical variables
    /// dummy-coded into grouped effects. Squares are formed for continuous
    /// variables only.
    pub fn with_dummies(
        raw: &DMatrix<f64>,
        variables: &[RawVariable],
        include_quadratic: bool,
        names: Option<&[String]>,
    ) -> Result<(Self, HeredityGraph)> {
        let q = variables.len();
        if q == 0 {
            return Err(Error::InvalidArgument("at least one raw variable is required".into()));
        }
        if raw.ncols() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: raw.ncols(),
            });
        }
        for (j, v) in variables.iter().enumerate() {
            if let RawVariable::Categorical { levels } = v {
                if *levels < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "categorical variable {j} has {levels} level(s); at least 2 required"
                    )));
                }
            }
        }
        let names: Vec<String> = match names {
            Some(n) if n.len() == q => n.to_vec(),
            Some(n) => {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    got: n.len(),
                })
            }
            None => default_names(q),
        };
        let width = |j: usize| match variables[j] {
            RawVariable::Continuous => 1,
            RawVariable::Categorical { levels } => levels - 1,
        };
        let group = |j: usize| match variables[j] {
            RawVariable::Continuous => None,
            RawVariable::Categorical { .. } => Some(j),
        };

        let mut effects = Vec::new();
        let mut ranges = Vec::new();
        let mut parents = Vec::new();
        let mut start = 0;
        let mut push = |kind, vars: Vec<usize>, group_id, name, cols: usize, ps: Vec<usize>| {
            effects.push(EffectDescriptor {
                id: effects.len(),
                kind,
                source_vars: vars,
                group_id,
                name,
            });
            ranges.push(start..start + cols);
            start += cols;
            parents.push(ps);
        };
        for j in 0..q {
            push(EffectKind::Main, vec![j], group(j), names[j].clone(), width(j), vec![]);
        }
        for r in 0..q {
            for j in r + 1..q {
                push(
                    EffectKind::Interaction,
                    vec![r, j],
                    group(r).or(group(j)),
                    format!("{}*{}", names[r], names[j]),
                    width(r) * width(j),
                    vec![r, j],
                );
            }
        }
        if include_quadratic {
            for j in 0..q {
                if variables[j] == RawVariable::Continuous {
                    push(EffectKind::Quadratic, vec![j], None, format!("{}^2", names[j]), 1, vec![j]);
                }
            }
        }

        let mut expansion = Self {
            effects,
            column_ranges: ranges,
            transform: ExpansionTransform::Polynomial {
                variables: variables.to_vec(),
                include_quadratic,
            },
            standardizer: None,
            num_raw: q,
        };
        let unscaled = expansion.transform_raw(raw)?;
        expansion.standardizer = Some(Standardizer::fit(&unscaled));
        Ok((expansion, HeredityGraph::new(parents, HeredityPolicy::None)))
    }

    /// Spline main effects for every variable and tensor-product
    /// interactions for every unordered pair.
    pub fn splines(raw: &DMatrix<f64>, num_functions: usize, degree: usize) -> Result<(Self, HeredityGraph)> {
        let design = SplineDesign::build(raw, num_functions, degree)?;
        Ok(Self::from_spline_design(design))
    }

    pub fn from_spline_design(design: SplineDesign) -> (Self, HeredityGraph) {
        let q = design.num_vars();
        let names = default_names(q);
        let mut effects = Vec::new();
        let mut parents = Vec::new();
        for j in 0..q {
            effects.push(EffectDescriptor {
                id: j,
                kind: EffectKind::SplineMain,
                source_vars: vec![j],
                group_id: None,
                name: format!("f({})", names[j]),
            });
            parents.push(vec![]);
        }
        for &(r, j) in design.pairs() {
            effects.push(EffectDescriptor {
                id: effects.len(),
                kind: EffectKind::SplineInteraction,
                source_vars: vec![r, j],
                group_id: None,
                name: format!("f({},{})", names[r], names[j]),
            });
            parents.push(vec![r, j]);
        }
        let expansion = Self {
            effects,
            column_ranges: design.blocks().to_vec(),
            num_raw: q,
            transform: ExpansionTransform::Spline(design),
            standardizer: None,
        };
        (expansion, HeredityGraph::new(parents, HeredityPolicy::None))
    }

    pub fn effects(&self) -> &[EffectDescriptor] {
        &self.effects
    }

    pub fn column_ranges(&self) -> &[Range<usize>] {
        &self.column_ranges
    }

    pub fn num_columns(&self) -> usize {
        self.column_ranges.last().map_or(0, |r| r.end)
    }

    pub fn num_raw(&self) -> usize {
        self.num_raw
    }

    pub fn transform_kind(&self) -> &ExpansionTransform {
        &self.transform
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn spline_design(&self) -> Option<&SplineDesign> {
        match &self.transform {
            ExpansionTransform::Spline(d) => Some(d),
            ExpansionTransform::Polynomial { .. } => None,
        }
    }

    /// Expanded row before standardization.
    pub fn transform_raw_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.num_raw {
            return Err(Error::DimensionMismatch {
                expected: self.num_raw,
                got: z.len(),
            });
        }
        let variables = match &self.transform {
            ExpansionTransform::Spline(d) => return Ok(d.row(z)),
            ExpansionTransform::Polynomial { variables, .. } => variables,
        };
        let base: Vec<Vec<f64>> = variables
            .iter()
            .zip(z)
            .enumerate()
            .map(|(j, (v, &value))| match v {
                RawVariable::Continuous => Ok(vec![value]),
                RawVariable::Categorical { levels } => {
                    let level = value as usize;
                    if value < 0.0 || value.fract() != 0.0 || level >= *levels {
                        return Err(Error::InvalidArgument(format!(
                            "variable {j}: level code {value} outside 0..{levels}"
                        )));
                    }
                    Ok((1..*levels).map(|l| if l == level { 1.0 } else { 0.0 }).collect())
                }
            })
            .collect::<Result<_>>()?;
        let mut row = Vec::with_capacity(self.num_columns());
        for effect in &self.effects {
            match effect.kind {
                EffectKind::Main => row.extend_from_slice(&base[effect.source_vars[0]]),
                EffectKind::Interaction => {
                    let (r, j) = (effect.source_vars[0], effect.source_vars[1]);
                    for a in &base[r] {
                        row.extend(base[j].iter().map(|b| a * b));
                    }
                }
                EffectKind::Quadratic => {
                    let v = base[effect.source_vars[0]][0];
                    row.push(v * v);
                }
                EffectKind::SplineMain | EffectKind::SplineInteraction => unreachable!(),
            }
        }
        Ok(row)
    }

    pub fn transform_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut row = self.transform_raw_row(z)?;
        if let Some(s) = &self.standardizer {
            s.apply_row(&mut row);
        }
        Ok(row)
    }

    fn map_rows(&self, raw: &DMatrix<f64>, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(raw.nrows(), self.num_columns());
        let mut z = vec![0.0; raw.ncols()];
        for i in 0..raw.nrows() {
            for (j, v) in z.iter_mut().enumerate() {
                *v = raw[(i, j)];
            }
            for (c, v) in f(&z)?.into_iter().enumerate() {
                out[(i, c)] = v;
            }
        }
        Ok(out)
    }

    pub fn transform_raw(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.map_rows(raw, |z| self.transform_raw_row(z))
    }

    /// Expanded, standardized design for `raw` samples.
    pub fn transform(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.map_rows(raw, |z| self.transform_row(z))
    }

    pub fn effect_of_column(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_columns()];
        for (e, r) in self.column_ranges.iter().enumerate() {
            for c in r.clone() {
                out[c] = e;
            }
        }
        out
    }
}

/// Heredity graph for an expansion under `policy`; true iff acyclic with
/// resolvable parents.
pub fn validate_heredity_graph(graph: &HeredityGraph) -> bool {
    let problems = graph.diagnostics();
    for p in &problems {
        log::debug!("heredity graph: {p}");
    }
    problems.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n: usize, q: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, q, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0 + 0.1 * j as f64)
    }

    #[test]
    fn seven_variables_give_35_effects() {
        let (e, g) = BasisExpansion::polynomial(&raw(30, 7), true).unwrap();
        assert_eq!(e.effects().len(), 35);
        assert_eq!(e.num_columns(), 35);
        assert_eq!(g.num_effects(), 35);
        assert!(validate_heredity_graph(&g));
    }

    #[test]
    fn single_variable_has_main_and_square() {
        let (e, g) = BasisExpansion::polynomial(&raw(10, 1), true).unwrap();
        let kinds: Vec<_> = e.effects().iter().map(|d| d.kind).collect();
        assert_eq!(kinds, vec![EffectKind::Main, EffectKind::Quadratic]);
        assert_eq!(g.parents(1), &[0]);
    }

    #[test]
    fn parent_set_sizes_by_kind() {
        let (e, g) = BasisExpansion::polynomial(&raw(30, 5), true).unwrap();
        assert_eq!(e.effects().len(), 5 + 10 + 5);
        for d in e.effects() {
            let expected = match d.kind {
                EffectKind::Main => 0,
                EffectKind::Interaction => 2,
                EffectKind::Quadratic => 1,
                _ => unreachable!(),
            };
            assert_eq!(g.parents(d.id).len(), expected);
            for &p in g.parents(d.id) {
                assert_eq!(e.effects()[p].kind, EffectKind::Main);
                assert!(d.source_vars.contains(&e.effects()[p].source_vars[0]));
            }
        }
    }

    #[test]
    fn zero_variables_rejected() {
        assert!(BasisExpansion::polynomial(&DMatrix::zeros(4, 0), true).is_err());
    }

    #[test]
    fn binary_factor_with_continuous_variable() {
        let raw = DMatrix::from_row_slice(4, 2, &[0.5, 0.0, -1.0, 1.0, 2.0, 1.0, 0.1, 0.0]);
        let vars = [RawVariable::Continuous, RawVariable::Categorical { levels: 2 }];
        let (e, g) = BasisExpansion::with_dummies(&raw, &vars, true, None).unwrap();
        let summary: Vec<_> = e
            .effects()
            .iter()
            .map(|d| (d.kind, d.source_vars.clone(), d.group_id))
            .collect();
        assert_eq!(
            summary,
            vec![
                (EffectKind::Main, vec![0], None),
                (EffectKind::Main, vec![1], Some(1)),
                (EffectKind::Interaction, vec![0, 1], Some(1)),
                (EffectKind::Quadratic, vec![0], None),
            ]
        );
        assert_eq!(g.parents(2), &[0, 1]);
    }

    #[test]
    fn three_level_factor_is_one_two_column_effect() {
        let raw = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let vars = [RawVariable::Categorical { levels: 3 }];
        let (e, _) = BasisExpansion::with_dummies(&raw, &vars, true, None).unwrap();
        assert_eq!(e.effects().len(), 1);
        assert_eq!(e.column_ranges()[0], 0..2);
        assert_eq!(e.transform_raw_row(&[2.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(e.transform_raw_row(&[0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(e.transform_raw_row(&[3.0]).is_err());
    }

    #[test]
    fn single_level_factor_rejected() {
        let raw = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        let vars = [RawVariable::Categorical { levels: 1 }];
        assert!(BasisExpansion::with_dummies(&raw, &vars, true, None).is_err());
    }

    #[test]
    fn all_continuous_dummies_match_polynomial() {
        let r = raw(20, 3);
        let a = BasisExpansion::polynomial(&r, true).unwrap();
        let b = BasisExpansion::with_dummies(&r, &[RawVariable::Continuous; 3], true, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardized_training_columns_have_zero_mean_unit_sd() {
        let r = raw(40, 3);
        let (e, _) = BasisExpansion::polynomial(&r, true).unwrap();
        let x = e.transform(&r).unwrap();
        for col in x.column_iter() {
            let mean = col.iter().sum::<f64>() / 40.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 39.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-10);
        }
    }
}
