//! Columnar data tables: CSV ingestion, column summaries and the
//! multi-membership data simulator.

mod csv_io;
mod sim;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{read_csv, read_csv_path, write_csv};
pub use sim::{sim_multi_mem, sim_multi_mem_with_latent, SimTruth, SimulatedMultiMembership};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty input: a header row is required")]
    Empty,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("empty column name at position {0}")]
    EmptyColumnName(usize),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: missing value")]
    Missing { row: usize, column: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as {kind}")]
    Unparseable {
        row: usize,
        column: String,
        value: String,
        kind: ColumnKind,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` has {found} rows, table has {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Integer,
    Factor,
}

impl std::fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Integer => "integer",
            ColumnKind::Factor => "factor",
        })
    }
}

/// A typed column. Factor cells are stored as indices into `levels`.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Integer(Vec<i64>),
    Factor {
        codes: Vec<usize>,
        levels: Vec<String>,
    },
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Numeric(_) => ColumnKind::Numeric,
            Column::Integer(_) => ColumnKind::Integer,
            Column::Factor { .. } => ColumnKind::Factor,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Integer(v) => v.len(),
            Column::Factor { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds a factor column, levels in first-appearance order.
    pub fn factor_from_strings<S: AsRef<str>>(values: &[S]) -> Column {
        let mut levels: Vec<String> = Vec::new();
        let mut index: std::collections::HashMap<String, usize> = Default::default();
        let codes = values
            .iter()
            .map(|v| {
                let v = v.as_ref();
                *index.entry(v.to_string()).or_insert_with(|| {
                    levels.push(v.to_string());
                    levels.len() - 1
                })
            })
            .collect();
        Column::Factor { codes, levels }
    }

    /// Numeric view of a numeric or integer column.
    pub fn as_f64(&self) -> Option<Vec<f64>> {
        match self {
            Column::Numeric(v) => Some(v.clone()),
            Column::Integer(v) => Some(v.iter().map(|&x| x as f64).collect()),
            Column::Factor { .. } => None,
        }
    }

    /// Cell `i` rendered as text (the factor label for factors).
    pub fn label(&self, i: usize) -> String {
        match self {
            Column::Numeric(v) => format!("{:?}", v[i]),
            Column::Integer(v) => v[i].to_string(),
            Column::Factor { codes, levels } => levels[codes[i]].clone(),
        }
    }

    /// Row labels usable as grouping keys. Integer columns are treated as
    /// factors; numeric columns only when every cell is integral.
    pub fn grouping_labels(&self) -> Option<Vec<String>> {
        match self {
            Column::Factor { codes, levels } => {
                Some(codes.iter().map(|&c| levels[c].clone()).collect())
            }
            Column::Integer(v) => Some(v.iter().map(|x| x.to_string()).collect()),
            Column::Numeric(v) => {
                if v.iter().all(|x| x.fract() == 0.0 && x.abs() < 9.0e15) {
                    Some(v.iter().map(|x| (*x as i64).to_string()).collect())
                } else {
                    None
                }
            }
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Integer(v) => Column::Integer(rows.iter().map(|&i| v[i]).collect()),
            Column::Factor { codes, levels } => Column::Factor {
                codes: rows.iter().map(|&i| codes[i]).collect(),
                levels: levels.clone(),
            },
        }
    }
}

/// An immutable table of equally long, uniquely named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    columns: IndexMap<String, Column>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self, DataError> {
        let n_rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        Self::with_rows(columns, n_rows)
    }

    /// Like [`Dataset::new`] but with an explicit row count, so that a table
    /// without columns can still have rows.
    pub fn with_rows(columns: Vec<(String, Column)>, n_rows: usize) -> Result<Self, DataError> {
        let mut map = IndexMap::with_capacity(columns.len());
        for (pos, (name, col)) in columns.into_iter().enumerate() {
            if name.is_empty() {
                return Err(DataError::EmptyColumnName(pos));
            }
            if col.len() != n_rows {
                return Err(DataError::LengthMismatch {
                    column: name,
                    expected: n_rows,
                    found: col.len(),
                });
            }
            if let Column::Numeric(v) = &col {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(DataError::Missing { row, column: name });
                }
            }
            if let Column::Factor { codes, levels } = &col {
                if codes.iter().any(|&c| c >= levels.len()) {
                    return Err(DataError::InvalidArgument(format!(
                        "factor `{name}` has a code outside its level list"
                    )));
                }
            }
            if map.insert(name.clone(), col).is_some() {
                return Err(DataError::DuplicateColumn(name));
            }
        }
        Ok(Dataset {
            columns: map,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Result<&Column, DataError> {
        self.columns
            .get(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Returns a copy with `name` replaced (or appended when absent).
    pub fn with_column(&self, name: &str, col: Column) -> Result<Dataset, DataError> {
        let mut cols: Vec<(String, Column)> = self
            .columns
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        match cols.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = col,
            None => cols.push((name.to_string(), col)),
        }
        Dataset::with_rows(cols, self.n_rows)
    }

    /// Row subset, preserving factor level lists.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), v.select(rows)))
                .collect(),
            n_rows: rows.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Summary {
    Numeric {
        mean: f64,
        min: f64,
        max: f64,
    },
    Factor {
        levels: Vec<String>,
        modal: String,
        reference: String,
    },
}

pub fn column_summary(d: &Dataset, name: &str) -> Result<Summary, DataError> {
    let col = d.column(name)?;
    match col {
        Column::Factor { codes, levels } => {
            let mut counts = vec![0usize; levels.len()];
            for &c in codes {
                counts[c] += 1;
            }
            // ties resolve to the earliest level
            let modal = counts
                .iter()
                .enumerate()
                .fold(
                    (0, 0),
                    |best, (i, &n)| if n > best.1 { (i, n) } else { best },
                )
                .0;
            Ok(Summary::Factor {
                levels: levels.clone(),
                modal: levels.get(modal).cloned().unwrap_or_default(),
                reference: levels.first().cloned().unwrap_or_default(),
            })
        }
        _ => {
            let v = col.as_f64().unwrap_or_default();
            if v.is_empty() {
                return Ok(Summary::Numeric {
                    mean: f64::NAN,
                    min: f64::NAN,
                    max: f64::NAN,
                });
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(Summary::Numeric { mean, min, max })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_summary() {
        let d = Dataset::new(vec![("x".into(), Column::Integer(vec![5, 5, 5]))]).unwrap();
        assert_eq!(
            column_summary(&d, "x").unwrap(),
            Summary::Numeric {
                mean: 5.0,
                min: 5.0,
                max: 5.0
            }
        );
    }

    #[test]
    fn factor_reference_is_first_seen() {
        let d = Dataset::new(vec![(
            "f".into(),
            Column::factor_from_strings(&["no", "yes", "no"]),
        )])
        .unwrap();
        match column_summary(&d, "f").unwrap() {
            Summary::Factor {
                reference, modal, ..
            } => {
                assert_eq!(reference, "no");
                assert_eq!(modal, "no");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_column_is_an_error() {
        let d = Dataset::default();
        assert!(matches!(
            column_summary(&d, "nope"),
            Err(DataError::UnknownColumn(_))
        ));
    }

    #[test]
    fn rejects_ragged_construction() {
        let err = Dataset::new(vec![
            ("a".into(), Column::Integer(vec![1, 2])),
            ("b".into(), Column::Integer(vec![1])),
        ])
        .unwrap_err();
        assert!(matches!(err, DataError::LengthMismatch { .. }));
    }

    #[test]
    fn rejects_non_finite_numeric() {
        let err =
            Dataset::new(vec![("a".into(), Column::Numeric(vec![1.0, f64::NAN]))]).unwrap_err();
        assert!(matches!(err, DataError::Missing { row: 1, .. }));
    }
}
