use nalgebra::DMatrix;
use serde::Serialize;

use super::DesignError;
use crate::formula::FixedTerm;
use crate::tabular::{Column, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VarCoding {
    Numeric {
        name: String,
    },
    /// `keep` lists the level indices that get a column.
    Factor {
        name: String,
        levels: Vec<String>,
        keep: Vec<usize>,
    },
}

impl VarCoding {
    fn width(&self) -> usize {
        match self {
            VarCoding::Numeric { .. } => 1,
            VarCoding::Factor { keep, .. } => keep.len(),
        }
    }

    fn part_names(&self) -> Vec<String> {
        match self {
            VarCoding::Numeric { name } => vec![name.clone()],
            VarCoding::Factor { name, levels, keep } => keep
                .iter()
                .map(|&k| format!("{name}{}", levels[k]))
                .collect(),
        }
    }
}

/// How population-level terms turn into columns. Kept so that new data is
/// coded exactly like the training data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEncoding {
    pub intercept: bool,
    pub terms: Vec<Vec<VarCoding>>,
    pub names: Vec<String>,
}

impl FixedEncoding {
    /// Treatment contrasts. A factor loses its first level unless the model
    /// has no intercept and this is the first term involving a factor, in
    /// which case it keeps every level.
    pub fn new(intercept: bool, terms: &[FixedTerm], d: &Dataset) -> Result<Self, DesignError> {
        let mut codings = Vec::new();
        let mut names = Vec::new();
        if intercept {
            names.push("Intercept".to_string());
        }
        let mut full_dummy_used = intercept;
        for term in terms {
            let n_factors = term
                .vars
                .iter()
                .filter(|v| matches!(d.get(v), Some(Column::Factor { .. })))
                .count();
            let full = !full_dummy_used && n_factors == 1;
            if n_factors > 0 {
                full_dummy_used = true;
            }
            let mut coding = Vec::new();
            for v in &term.vars {
                let col = d
                    .get(v)
                    .ok_or_else(|| DesignError::MissingColumn(v.clone()))?;
                coding.push(match col {
                    Column::Factor { levels, .. } => {
                        let keep: Vec<usize> = if full {
                            (0..levels.len()).collect()
                        } else {
                            (1..levels.len()).collect()
                        };
                        if keep.is_empty() {
                            return Err(DesignError::NoContrast(v.clone()));
                        }
                        VarCoding::Factor {
                            name: v.clone(),
                            levels: levels.clone(),
                            keep,
                        }
                    }
                    _ => VarCoding::Numeric { name: v.clone() },
                });
            }
            names.extend(term_names(&coding));
            codings.push(coding);
        }
        Ok(FixedEncoding {
            intercept,
            terms: codings,
            names,
        })
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// Builds the design matrix for `d` with this coding.
    pub fn encode(&self, d: &Dataset) -> Result<DMatrix<f64>, DesignError> {
        let n = d.n_rows();
        let mut x = DMatrix::zeros(n, self.width());
        let mut j = 0;
        if self.intercept {
            x.column_mut(0).fill(1.0);
            j = 1;
        }
        for coding in &self.terms {
            let parts = coding
                .iter()
                .map(|c| part_columns(c, d))
                .collect::<Result<Vec<_>, _>>()?;
            for col in product_columns(&parts, n) {
                x.set_column(j, &nalgebra::DVector::from_vec(col));
                j += 1;
            }
        }
        Ok(x)
    }
}

fn term_names(coding: &[VarCoding]) -> Vec<String> {
    // the first variable varies fastest
    let widths: Vec<usize> = coding.iter().map(VarCoding::width).collect();
    let total: usize = widths.iter().product();
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut parts = Vec::new();
        for (c, w) in coding.iter().zip(&widths) {
            parts.push(c.part_names()[rem % w].clone());
            rem /= w;
        }
        out.push(parts.join(":"));
    }
    out
}

fn part_columns(c: &VarCoding, d: &Dataset) -> Result<Vec<Vec<f64>>, DesignError> {
    match c {
        VarCoding::Numeric { name } => {
            let col = d
                .get(name)
                .ok_or_else(|| DesignError::MissingColumn(name.clone()))?;
            let v = col
                .as_f64()
                .ok_or_else(|| DesignError::KindChanged(name.clone()))?;
            Ok(vec![v])
        }
        VarCoding::Factor { name, levels, keep } => {
            let col = d
                .get(name)
                .ok_or_else(|| DesignError::MissingColumn(name.clone()))?;
            let labels: Vec<String> = match col {
                Column::Factor { codes, levels: own } => {
                    codes.iter().map(|&c| own[c].clone()).collect()
                }
                other => (0..other.len()).map(|i| other.label(i)).collect(),
            };
            let mut cols = vec![vec![0.0; labels.len()]; keep.len()];
            for (i, lab) in labels.iter().enumerate() {
                let level = levels.iter().position(|l| l == lab).ok_or_else(|| {
                    DesignError::UnknownLevel {
                        var: name.clone(),
                        level: lab.clone(),
                    }
                })?;
                if let Some(k) = keep.iter().position(|&k| k == level) {
                    cols[k][i] = 1.0;
                }
            }
            Ok(cols)
        }
    }
}

fn product_columns(parts: &[Vec<Vec<f64>>], n: usize) -> Vec<Vec<f64>> {
    let widths: Vec<usize> = parts.iter().map(Vec::len).collect();
    let total: usize = widths.iter().product();
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut col = vec![1.0; n];
        for (p, w) in parts.iter().zip(&widths) {
            let src = &p[rem % w];
            for (c, s) in col.iter_mut().zip(src) {
                *c *= s;
            }
            rem /= w;
        }
        out.push(col);
    }
    out
}

/// Population-level design of one predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedBlock {
    pub owner: String,
    pub x: DMatrix<f64>,
    pub encoding: FixedEncoding,
}

impl FixedBlock {
    pub fn column_names(&self) -> &[String] {
        &self.encoding.names
    }

    pub fn has_intercept(&self) -> bool {
        self.encoding.intercept
    }
}

pub fn build_fixed(
    owner: &str,
    intercept: bool,
    terms: &[FixedTerm],
    d: &Dataset,
) -> Result<FixedBlock, DesignError> {
    let encoding = FixedEncoding::new(intercept, terms, d)?;
    let x = encoding.encode(d)?;
    Ok(FixedBlock {
        owner: owner.to_string(),
        x,
        encoding,
    })
}
