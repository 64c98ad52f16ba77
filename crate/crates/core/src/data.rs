//! Labeled samples in expanded-effect space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Rows of `x` are samples; labels are stored as `+1.0` / `-1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidLabel(bad));
        }
        for column in 0..x.ncols() {
            for row in 0..x.nrows() {
                if !x[(row, column)].is_finite() {
                    return Err(Error::NonfiniteFeature { row, column });
                }
            }
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v > 0.0).count();
        (pos, self.y.len() - pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (pos, neg) = self.class_counts();
        pos > 0 && neg > 0
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Same rows, labels multiplied by -1.
    pub fn flipped(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.iter().map(|v| -v).collect(),
        }
    }
}
