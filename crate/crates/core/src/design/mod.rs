//! Numeric model structure: population-level matrices, group-level blocks
//! (including multi-membership) and penalized smooths.

mod fixed;
mod random;
mod smooth;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use thiserror::Error;

use crate::formula::NlExpr;
use crate::modelspec::{CheckedSpec, Family, Link, Role};
use crate::tabular::{Column, DataError, Dataset};

pub use fixed::{build_fixed, FixedBlock, FixedEncoding, VarCoding};
pub use random::{build_mm, build_random, RandomBlock};
pub use smooth::{
    basis_matrix, bspline_basis, build_smooth, difference_penalty, quantile_knots, SmoothBlock,
};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("column `{0}` is missing")]
    MissingColumn(String),
    #[error("column `{0}` does not have the kind it had when the model was built")]
    KindChanged(String),
    #[error("factor `{0}` has a single level: no estimable contrast")]
    NoContrast(String),
    #[error("level `{level}` of `{var}` was not seen in the training data")]
    UnknownLevel { var: String, level: String },
    #[error("weight column `{column}` is negative in row {row}")]
    NegativeWeight { column: String, row: usize },
    #[error("mm() has {members} members but {weights} weight columns")]
    WeightArity { members: usize, weights: usize },
    #[error("grouping `{0}` is not a multi-membership grouping")]
    NotMultiMembership(String),
    #[error("smooth of `{var}`: {reason}")]
    Smooth { var: String, reason: String },
}

/// Everything that enters one linear predictor apart from group-level terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorDesign {
    pub owner: String,
    pub role: Role,
    pub link: Link,
    pub fixed: FixedBlock,
    pub smooths: Vec<SmoothBlock>,
}

impl PredictorDesign {
    /// Coefficient names of β: fixed columns then the unpenalized smooth parts.
    pub fn coef_names(&self) -> Vec<String> {
        let prefix = crate::modelspec::coef_prefix(&self.owner);
        self.fixed
            .column_names()
            .iter()
            .map(|n| format!("{prefix}{n}"))
            .chain(self.smooths.iter().map(SmoothBlock::fixed_name))
            .collect()
    }

    pub fn n_coefs(&self) -> usize {
        self.fixed.x.ncols() + self.smooths.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlDesign {
    pub expr: NlExpr,
    pub covariates: IndexMap<String, Vec<f64>>,
}

/// A compiled model, immutable after [`assemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    pub family: Family,
    pub n: usize,
    pub predictors: Vec<PredictorDesign>,
    pub random: Vec<RandomBlock>,
    /// Predictor index of every coefficient of every random block.
    pub random_owner_index: Vec<Vec<usize>>,
    pub nl: Option<NlDesign>,
    pub constant_dpars: Vec<String>,
    pub response: Option<Vec<f64>>,
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DesignSet {
    pub fn predictor_index(&self, owner: &str) -> Option<usize> {
        self.predictors.iter().position(|p| p.owner == owner)
    }

    pub fn response(&self) -> &[f64] {
        self.response
            .as_deref()
            .expect("design built with a response")
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nl.is_some()
    }

    /// Number of regression coefficients: β, smooth parts and all group effects.
    pub fn n_coefficients(&self) -> usize {
        let fixed: usize = self.predictors.iter().map(PredictorDesign::n_coefs).sum();
        let smooth: usize = self
            .predictors
            .iter()
            .flat_map(|p| &p.smooths)
            .map(SmoothBlock::n_penalized)
            .sum();
        let random: usize = self.random.iter().map(|r| r.q() * r.n_levels()).sum();
        fixed + smooth + random
    }
}

fn numeric(d: &Dataset, name: &str) -> Result<Vec<f64>, DesignError> {
    let col = d
        .get(name)
        .ok_or_else(|| DesignError::MissingColumn(name.to_string()))?;
    col.as_f64()
        .ok_or_else(|| DesignError::KindChanged(name.to_string()))
}

fn owner_indices(predictors: &[PredictorDesign], block: &RandomBlock) -> Vec<usize> {
    block
        .coef_owners
        .iter()
        .map(|o| {
            predictors
                .iter()
                .position(|p| &p.owner == o)
                .expect("block owners are predictors")
        })
        .collect()
}

fn nl_design(spec: &CheckedSpec, d: &Dataset) -> Result<Option<NlDesign>, DesignError> {
    let Some(expr) = spec.spec().main_formula.nl_expr() else {
        return Ok(None);
    };
    let mut covariates = IndexMap::new();
    for c in spec.nl_covariates() {
        covariates.insert(c.clone(), numeric(d, c)?);
    }
    Ok(Some(NlDesign {
        expr: expr.clone(),
        covariates,
    }))
}

fn weights(spec: &CheckedSpec, d: &Dataset) -> Result<Vec<f64>, DesignError> {
    match spec.weights() {
        Some(w) => numeric(d, w),
        None => Ok(vec![1.0; d.n_rows()]),
    }
}

/// Builds every block of a checked specification on its training data.
pub fn assemble(spec: &CheckedSpec, d: &Dataset) -> Result<DesignSet, DesignError> {
    let mut predictors = Vec::new();
    for p in spec.predictors() {
        let fixed = build_fixed(&p.owner, p.intercept, &p.fixed_terms, d)?;
        let smooths = p
            .smooths
            .iter()
            .map(|s| build_smooth(&p.owner, s, d))
            .collect::<Result<Vec<_>, _>>()?;
        predictors.push(PredictorDesign {
            owner: p.owner.clone(),
            role: p.role,
            link: p.link,
            fixed,
            smooths,
        });
    }
    let random = spec
        .blocks()
        .iter()
        .map(|b| build_random(b, d))
        .collect::<Result<Vec<_>, _>>()?;
    let random_owner_index = random
        .iter()
        .map(|b| owner_indices(&predictors, b))
        .collect();
    let mut warnings: Vec<String> = spec.warnings().to_vec();
    warnings.extend(random.iter().flat_map(|r| r.warnings.iter().cloned()));
    let response = numeric(d, spec.response())?;
    Ok(DesignSet {
        family: spec.family(),
        n: d.n_rows(),
        nl: nl_design(spec, d)?,
        constant_dpars: spec.constant_dpars().to_vec(),
        weights: weights(spec, d)?,
        predictors,
        random,
        random_owner_index,
        response: Some(response),
        warnings,
    })
}

/// Builds the design of `newdata` with the codings of a training design.
/// Group levels unseen in training are appended after the known ones.
/// The response is read when present.
pub fn assemble_new(
    spec: &CheckedSpec,
    train: &DesignSet,
    newdata: &Dataset,
) -> Result<DesignSet, DesignError> {
    let mut predictors = Vec::new();
    for p in &train.predictors {
        let x = p.fixed.encoding.encode(newdata)?;
        let smooths = p
            .smooths
            .iter()
            .map(|s| {
                let (xs, zs) = s.evaluate(&numeric(newdata, &s.covariate)?);
                Ok(SmoothBlock {
                    xs,
                    zs,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>, DesignError>>()?;
        predictors.push(PredictorDesign {
            fixed: FixedBlock {
                x,
                ..p.fixed.clone()
            },
            smooths,
            ..p.clone()
        });
    }
    let random = train
        .random
        .iter()
        .map(|r| {
            random::build_random_with(
                &r.spec,
                newdata,
                Some(&r.levels[..r.n_known_levels]),
                Some(&r.encodings),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let response = match newdata.get(spec.response()) {
        Some(Column::Factor { .. }) | None => None,
        Some(c) => c.as_f64(),
    };
    let weights = match spec.weights() {
        Some(w) if newdata.contains(w) => numeric(newdata, w)?,
        _ => vec![1.0; newdata.n_rows()],
    };
    Ok(DesignSet {
        family: train.family,
        n: newdata.n_rows(),
        nl: nl_design(spec, newdata)?,
        constant_dpars: train.constant_dpars.clone(),
        predictors,
        random_owner_index: train.random_owner_index.clone(),
        random,
        response,
        weights,
        warnings: Vec::new(),
    })
}

/// Dense CSV rendering of a matrix with a header row.
pub fn matrix_csv(names: &[String], m: &DMatrix<f64>) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
