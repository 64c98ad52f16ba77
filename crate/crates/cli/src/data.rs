//! CSV ingestion: a header row, a label column `y`, numeric features, and
//! an optional JSON schema declaring categorical columns.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use heredity_svm::expand::RawVariable;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const LABEL_COLUMN: &str = "y";

/// Sidecar schema: `{"categorical": {"race": 3}}` declares `race` as a
/// factor with level codes `0, 1, 2`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default)]
    pub categorical: BTreeMap<String, usize>,
}

impl Schema {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read schema {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("schema {}: {e}", path.display())))
    }

    /// Variable kinds in `names` order; every declared column must exist.
    pub fn variables(&self, names: &[String]) -> CliResult<Vec<RawVariable>> {
        for col in self.categorical.keys() {
            if !names.contains(col) {
                return Err(CliError::Data(format!("schema declares unknown column `{col}`")));
            }
        }
        names
            .iter()
            .map(|n| match self.categorical.get(n) {
                None => Ok(RawVariable::Continuous),
                Some(&levels) if levels >= 2 => Ok(RawVariable::Categorical { levels }),
                Some(&levels) => Err(CliError::Data(format!("column `{n}` declares {levels} level(s); need at least 2"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub names: Vec<String>,
    pub features: DMatrix<f64>,
    /// Labels in `{+1, -1}`, present when the file has a `y` column.
    pub labels: Option<Vec<f64>>,
}

fn parse_cell(text: &str, row: usize, column: &str) -> CliResult<f64> {
    let t = text.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Err(CliError::Data(format!("missing value in column `{column}`, data row {row}")));
    }
    let v: f64 = t
        .parse()
        .map_err(|_| CliError::Data(format!("non-numeric value `{t}` in column `{column}`, data row {row}")))?;
    if !v.is_finite() {
        return Err(CliError::Data(format!("non-finite value in column `{column}`, data row {row}")));
    }
    Ok(v)
}

/// Labels in `{+1, -1}` pass through; `{1, 0}` are mapped to `{+1, -1}`
/// with a warning; anything else is an error.
pub fn normalize_labels(raw: Vec<f64>) -> CliResult<Vec<f64>> {
    if raw.iter().all(|&v| v == 1.0 || v == -1.0) {
        return Ok(raw);
    }
    if raw.iter().all(|&v| v == 1.0 || v == 0.0) {
        log::warn!("labels coded 1/0; mapping 0 to -1");
        return Ok(raw.into_iter().map(|v| if v == 1.0 { 1.0 } else { -1.0 }).collect());
    }
    let bad = raw.iter().find(|&&v| v != 1.0 && v != -1.0 && v != 0.0).copied().unwrap_or(0.0);
    Err(CliError::Data(format!("labels must be +1/-1 or 1/0, found {bad}")))
}

impl CsvDataset {
    pub fn from_reader<R: Read>(reader: R) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("cannot read CSV header: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let label_at = header.iter().position(|h| h == LABEL_COLUMN);
        if header.iter().filter(|h| *h == LABEL_COLUMN).count() > 1 {
            return Err(CliError::Data("more than one `y` column".into()));
        }
        let names: Vec<String> = header.iter().filter(|h| *h != LABEL_COLUMN).cloned().collect();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut rows = 0;
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| CliError::Data(format!("malformed CSV: {e}")))?;
            if record.len() != header.len() {
                return Err(CliError::Data(format!(
                    "data row {} has {} fields, header has {}",
                    r + 1,
                    record.len(),
                    header.len()
                )));
            }
            for (c, cell) in record.iter().enumerate() {
                let v = parse_cell(cell, r + 1, &header[c])?;
                if Some(c) == label_at {
                    labels.push(v);
                } else {
                    values.push(v);
                }
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(CliError::Data("no data rows".into()));
        }
        let features = DMatrix::from_row_slice(rows, names.len(), &values);
        let labels = match label_at {
            Some(_) => Some(normalize_labels(labels)?),
            None => None,
        };
        Ok(Self {
            names,
            features,
            labels,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn require_labels(&self) -> CliResult<&[f64]> {
        self.labels
            .as_deref()
            .ok_or_else(|| CliError::Data(format!("no `{LABEL_COLUMN}` column")))
    }

    /// Level codes of categorical columns must be integers in `0..levels`.
    pub fn check_levels(&self, variables: &[RawVariable]) -> CliResult<()> {
        for (j, v) in variables.iter().enumerate() {
            if let RawVariable::Categorical { levels } = v {
                for (i, &x) in self.features.column(j).iter().enumerate() {
                    if x < 0.0 || x.fract() != 0.0 || x >= *levels as f64 {
                        return Err(CliError::Data(format!(
                            "column `{}`, data row {}: level code {x} outside 0..{levels}",
                            self.names[j],
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
