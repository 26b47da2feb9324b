//! Multi-formula model specifications: the family, one formula per
//! distributional or non-linear parameter, priors, and the resolution of
//! group-level terms into correlation blocks.

mod blocks;
mod expand;
mod family;
mod prior;
mod validate;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{parse_formula, FormulaAst, ParseError, ParseMode, Rhs, RhsSpec};

pub use blocks::{resolve_blocks, BlockCoef, CoefTerm, GroupBlockSpec};
pub use expand::{expand_group_expr, Grouping};
pub use family::{Family, Link};
pub use prior::{PriorDensity, PriorSpec, PriorTarget};
pub use validate::{validate, CheckedSpec, Predictor, Role, SmoothSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("cannot parse `{text}`: {error}\n{rendered}")]
    Parse {
        text: String,
        error: ParseError,
        rendered: String,
    },
    #[error("duplicate formula for `{0}`")]
    DuplicateFormula(String),
    #[error("family `{family}` has no parameter `{name}`")]
    UnknownDpar { family: Family, name: String },
    #[error("`{0}` has a formula but does not appear in the non-linear expression")]
    UnusedNlpar(String),
    #[error("{0}")]
    FormulaKind(String),
    #[error("the main formula needs a response variable")]
    MissingResponse,
    #[error("formula for `{0}` must not have addition terms")]
    MisplacedAterms(String),
    #[error("mm() cannot be combined with other grouping operators in `{0}`")]
    NestedMm(String),
    #[error("ID `{id}` is used with different groupings `{first}` and `{second}`")]
    IdConflict {
        id: String,
        first: String,
        second: String,
    },
    #[error("ID `{0}` mixes correlated and uncorrelated group-level terms")]
    IdBarConflict(String),
    #[error("coefficient `{coef}` appears twice in the block for `{group}`")]
    DuplicateCoefficient { coef: String, group: String },
    #[error("group-level term for `{0}` has no coefficients")]
    EmptyGroupTerm(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("unknown variable `{name}` in {context}{}", suggestion.as_ref().map(|s| format!("; did you mean `{s}`?")).unwrap_or_default())]
    UnknownVariable {
        name: String,
        context: String,
        suggestion: Option<String>,
    },
    #[error("response `{response}` is incompatible with family `{family}`: {reason}")]
    ResponseMismatch {
        family: Family,
        response: String,
        reason: String,
    },
    #[error("`{construct}` is not supported ({feature})")]
    Unsupported { construct: String, feature: String },
    #[error("variable `{name}` used as {context} must be {expected}, found {found}")]
    BadKind {
        name: String,
        context: String,
        expected: String,
        found: String,
    },
    #[error("`{0}` in the non-linear expression is neither a data column nor a parameter with its own formula")]
    UnboundNlIdentifier(String),
}

impl SpecError {
    pub fn is_parse_error(&self) -> bool {
        matches!(self, SpecError::Parse { .. })
    }
}

/// Name prefix for coefficients of a predictor: empty for `mu`, `owner_` otherwise.
pub fn coef_prefix(owner: &str) -> String {
    if owner == "mu" {
        String::new()
    } else {
        format!("{owner}_")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub family: Family,
    pub main_formula: FormulaAst,
    pub dpar_formulas: IndexMap<String, FormulaAst>,
    pub nlpar_formulas: IndexMap<String, FormulaAst>,
    pub is_nonlinear: bool,
    pub priors: Vec<PriorSpec>,
}

impl ModelSpec {
    /// Linear predictors in declaration order, owner-major: `mu` (linear
    /// models) or the nlpars (non-linear models), then the dpars.
    pub fn predictors(&self) -> Vec<(&str, &RhsSpec)> {
        let mut out = Vec::new();
        if let Rhs::Terms(t) = &self.main_formula.rhs {
            out.push(("mu", t));
        }
        for (name, f) in &self.nlpar_formulas {
            out.push((name.as_str(), f.terms().expect("nlpar formulas are linear")));
        }
        for (name, f) in &self.dpar_formulas {
            out.push((name.as_str(), f.terms().expect("dpar formulas are linear")));
        }
        out
    }

    pub fn response(&self) -> Option<&str> {
        self.main_formula.lhs_names().first().map(String::as_str)
    }

    /// Family parameters besides `mu` that have no formula of their own.
    pub fn constant_dpars(&self) -> Vec<&'static str> {
        self.family
            .dpars()
            .iter()
            .copied()
            .filter(|d| *d != "mu" && !self.dpar_formulas.contains_key(*d))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Parses and assembles a specification from formula strings. The main
    /// formula is read as a non-linear expression when `nonlinear` is set.
    pub fn from_strings(
        main: &str,
        extra: &[&str],
        family: Family,
        nonlinear: bool,
        priors: Vec<PriorSpec>,
    ) -> Result<ModelSpec, SpecError> {
        let parse = |text: &str, mode| {
            parse_formula(text, mode).map_err(|error| SpecError::Parse {
                text: text.to_string(),
                rendered: error.render(text),
                error,
            })
        };
        let mode = if nonlinear {
            ParseMode::Nonlinear
        } else {
            ParseMode::Standard
        };
        let main = parse(main, mode)?;
        let extra = extra
            .iter()
            .map(|t| parse(t, ParseMode::Standard))
            .collect::<Result<Vec<_>, _>>()?;
        build_spec(main, extra, family, nonlinear, priors)
    }
}

/// Classifies extra formulas into dpar and nlpar formulas. A left-hand side
/// with several names (`ult + omega + theta ~ ...`) yields one formula per name.
pub fn build_spec(
    main: FormulaAst,
    extra: Vec<FormulaAst>,
    family: Family,
    nonlinear: bool,
    priors: Vec<PriorSpec>,
) -> Result<ModelSpec, SpecError> {
    match (&main.rhs, nonlinear) {
        (Rhs::Terms(_), true) => {
            return Err(SpecError::FormulaKind(
                "non-linear models need a non-linear main formula".into(),
            ))
        }
        (Rhs::Nonlinear(_), false) => {
            return Err(SpecError::FormulaKind(
                "a non-linear main formula requires non-linear mode".into(),
            ))
        }
        _ => {}
    }
    match main.lhs_names() {
        [] => return Err(SpecError::MissingResponse),
        [_] => {}
        names => {
            return Err(SpecError::FormulaKind(format!(
            "the main formula has several responses ({}); multivariate models are not supported",
            names.join(", ")
        )))
        }
    }
    let nl_idents = main.nl_expr().map(|e| e.identifiers()).unwrap_or_default();

    let mut dpar_formulas = IndexMap::new();
    let mut nlpar_formulas = IndexMap::new();
    for f in extra {
        let names = f.lhs_names().to_vec();
        if names.is_empty() {
            return Err(SpecError::FormulaKind(format!(
                "additional formula `{f}` needs a parameter name on its left-hand side"
            )));
        }
        if f.response.as_ref().is_some_and(|r| !r.aterms.is_empty()) {
            return Err(SpecError::MisplacedAterms(names.join(" + ")));
        }
        if f.terms().is_none() {
            return Err(SpecError::FormulaKind(format!(
                "formula for `{}` must be a linear formula",
                names.join(" + ")
            )));
        }
        for name in names {
            let mut single = f.clone();
            if let Some(r) = single.response.as_mut() {
                r.variables = vec![name.clone()];
            }
            if name == "mu"
                || dpar_formulas.contains_key(&name)
                || nlpar_formulas.contains_key(&name)
            {
                return Err(SpecError::DuplicateFormula(name));
            }
            if family.has_dpar(&name) {
                dpar_formulas.insert(name, single);
            } else if nonlinear {
                if !nl_idents.contains(&name) {
                    return Err(SpecError::UnusedNlpar(name));
                }
                nlpar_formulas.insert(name, single);
            } else {
                return Err(SpecError::UnknownDpar { family, name });
            }
        }
    }

    let spec = ModelSpec {
        family,
        main_formula: main,
        dpar_formulas,
        nlpar_formulas,
        is_nonlinear: nonlinear,
        priors,
    };
    check_priors(&spec)?;
    Ok(spec)
}

fn check_priors(spec: &ModelSpec) -> Result<(), SpecError> {
    let owners: Vec<&str> = spec.predictors().iter().map(|(o, _)| *o).collect();
    for p in &spec.priors {
        p.check()?;
        match &p.target {
            PriorTarget::Coefficient { owner, .. } | PriorTarget::Intercept { owner } => {
                if !owners.contains(&owner.as_str()) {
                    return Err(SpecError::InvalidPrior(format!(
                        "`{p}` refers to `{owner}`, which has no formula in this model"
                    )));
                }
            }
            PriorTarget::Sigma if !spec.constant_dpars().contains(&"sigma") => {
                return Err(SpecError::InvalidPrior(format!(
                    "`{p}`: the model has no constant sigma parameter"
                )));
            }
            _ => {}
        }
    }
    Ok(())
}
