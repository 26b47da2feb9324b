use log::warn;
use serde::Serialize;

use super::blocks::{resolve_blocks, GroupBlockSpec};
use super::expand::Grouping;
use super::{Family, Link, ModelSpec, SpecError};
use crate::formula::{ArgValue, FixedTerm, RhsSpec, SpecialFun, SpecialTerm};
use crate::tabular::{Column, ColumnKind, Dataset};

pub const DEFAULT_SMOOTH_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Dpar,
    Nlpar,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothSpec {
    pub var: String,
    pub k: usize,
    /// Term label such as `sarea`.
    pub label: String,
}

/// One linear predictor of the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predictor {
    pub owner: String,
    pub role: Role,
    /// Link applied to this predictor; nlpars enter the non-linear
    /// expression on the identity scale.
    pub link: Link,
    pub intercept: bool,
    pub fixed_terms: Vec<FixedTerm>,
    pub smooths: Vec<SmoothSpec>,
}

/// A specification checked against a dataset. Only [`validate`] builds one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckedSpec {
    spec: ModelSpec,
    response: String,
    weights: Option<String>,
    predictors: Vec<Predictor>,
    blocks: Vec<GroupBlockSpec>,
    constant_dpars: Vec<String>,
    nl_covariates: Vec<String>,
    coerced_groupings: Vec<String>,
    warnings: Vec<String>,
}

impl CheckedSpec {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn response(&self) -> &str {
        &self.response
    }

    pub fn weights(&self) -> Option<&str> {
        self.weights.as_deref()
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    pub fn predictor(&self, owner: &str) -> Option<&Predictor> {
        self.predictors.iter().find(|p| p.owner == owner)
    }

    pub fn blocks(&self) -> &[GroupBlockSpec] {
        &self.blocks
    }

    pub fn constant_dpars(&self) -> &[String] {
        &self.constant_dpars
    }

    pub fn nl_covariates(&self) -> &[String] {
        &self.nl_covariates
    }

    pub fn coerced_groupings(&self) -> &[String] {
        &self.coerced_groupings
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_nonlinear(&self) -> bool {
        self.spec.is_nonlinear
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checked spec serializes")
    }
}

fn unsupported_feature(fun: SpecialFun) -> &'static str {
    match fun {
        SpecialFun::S => "smooth terms",
        SpecialFun::T2 => "tensor-product smooths are out of scope; use separate s() terms",
        SpecialFun::Cs => "category-specific effects are out of scope",
        SpecialFun::Mo => "monotonic effects are out of scope",
        SpecialFun::Me => "measurement-error terms are out of scope",
        SpecialFun::Gp => "Gaussian-process terms are out of scope",
    }
}

fn unsupported_aterm(fun: &str) -> &'static str {
    match fun {
        "se" => "known standard errors are out of scope",
        "cens" => "censored responses are out of scope",
        "trunc" => "truncated responses are out of scope",
        _ => "this addition term is out of scope",
    }
}

struct Checker<'a> {
    data: &'a Dataset,
    coerced: Vec<String>,
    warnings: Vec<String>,
}

impl Checker<'_> {
    fn column(&self, name: &str, context: &str) -> Result<&Column, SpecError> {
        self.data
            .get(name)
            .ok_or_else(|| SpecError::UnknownVariable {
                name: name.to_string(),
                context: context.to_string(),
                suggestion: nearest(name, self.data.names()),
            })
    }

    fn numeric(&self, name: &str, context: &str) -> Result<&Column, SpecError> {
        let col = self.column(name, context)?;
        if col.kind() == ColumnKind::Factor {
            return Err(SpecError::BadKind {
                name: name.into(),
                context: context.into(),
                expected: "numeric".into(),
                found: "factor".into(),
            });
        }
        Ok(col)
    }

    fn grouping_factor(&mut self, name: &str) -> Result<(), SpecError> {
        let col = self.column(name, "a grouping term")?;
        match col.kind() {
            ColumnKind::Factor => Ok(()),
            kind => {
                if col.grouping_labels().is_none() {
                    return Err(SpecError::BadKind {
                        name: name.into(),
                        context: "a grouping factor".into(),
                        expected: "a factor or integer-valued column".into(),
                        found: kind.to_string(),
                    });
                }
                if !self.coerced.iter().any(|c| c == name) {
                    let msg = format!("grouping variable `{name}` ({kind}) is treated as a factor");
                    warn!("{msg}");
                    self.coerced.push(name.to_string());
                    self.warnings.push(msg);
                }
                Ok(())
            }
        }
    }

    fn terms(&self, terms: &[FixedTerm], context: &str) -> Result<(), SpecError> {
        for t in terms {
            for v in &t.vars {
                self.column(v, context)?;
            }
        }
        Ok(())
    }

    fn smooth(&self, s: &SpecialTerm, context: &str) -> Result<SmoothSpec, SpecError> {
        if s.fun != SpecialFun::S {
            return Err(SpecError::Unsupported {
                construct: s.to_string(),
                feature: unsupported_feature(s.fun).into(),
            });
        }
        let vars = s.variables();
        if vars.len() != 1 {
            return Err(SpecError::Unsupported {
                construct: s.to_string(),
                feature: "only univariate smooths s(x) are supported".into(),
            });
        }
        let mut k = DEFAULT_SMOOTH_K;
        for arg in &s.args {
            match (arg.name.as_deref(), &arg.value) {
                (None, ArgValue::Ident(_)) => {}
                (Some("k"), ArgValue::Number(v)) if v.fract() == 0.0 && *v >= 4.0 => {
                    k = *v as usize
                }
                (Some("k"), _) => {
                    return Err(SpecError::Unsupported {
                        construct: s.to_string(),
                        feature: "k must be an integer of at least 4".into(),
                    })
                }
                _ => {
                    return Err(SpecError::Unsupported {
                        construct: s.to_string(),
                        feature: "only the k argument is supported for s()".into(),
                    })
                }
            }
        }
        let var = vars[0].to_string();
        self.numeric(&var, context)?;
        Ok(SmoothSpec {
            var,
            k,
            label: s.label(),
        })
    }
}

fn nearest<'a>(name: &str, candidates: impl Iterator<Item = &'a str>) -> Option<String> {
    candidates
        .map(|c| (strsim::levenshtein(name, c), c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c.to_string())
}

fn is_count(col: &Column) -> Result<(), String> {
    let values = col
        .as_f64()
        .ok_or_else(|| "a factor is not a count".to_string())?;
    for (i, v) in values.iter().enumerate() {
        if *v < 0.0 {
            return Err(format!("row {} holds the negative value {v}", i + 1));
        }
        if v.fract() != 0.0 {
            return Err(format!("row {} holds the non-integer value {v}", i + 1));
        }
    }
    Ok(())
}

/// Checks a specification against a dataset and freezes it.
pub fn validate(spec: &ModelSpec, d: &Dataset) -> Result<CheckedSpec, SpecError> {
    let mut ck = Checker {
        data: d,
        coerced: Vec::new(),
        warnings: Vec::new(),
    };
    let family = spec.family;

    let response = spec
        .response()
        .ok_or(SpecError::MissingResponse)?
        .to_string();
    let col = ck.column(&response, "the response")?;
    let mismatch = |reason: String| SpecError::ResponseMismatch {
        family,
        response: response.clone(),
        reason,
    };
    if family.is_count() {
        is_count(col).map_err(mismatch)?;
    } else if col.kind() == ColumnKind::Factor {
        return Err(mismatch("the response is a factor".into()));
    }

    let mut weights = None;
    if let Some(resp) = &spec.main_formula.response {
        for a in &resp.aterms {
            if a.fun != "weights" {
                return Err(SpecError::Unsupported {
                    construct: a.to_string(),
                    feature: unsupported_aterm(&a.fun).into(),
                });
            }
            let name = match a.args.as_slice() {
                [arg] if arg.name.is_none() => match &arg.value {
                    ArgValue::Ident(n) => n.clone(),
                    ArgValue::Number(_) => {
                        return Err(SpecError::Unsupported {
                            construct: a.to_string(),
                            feature: "weights() takes a column name".into(),
                        })
                    }
                },
                _ => {
                    return Err(SpecError::Unsupported {
                        construct: a.to_string(),
                        feature: "weights() takes exactly one column".into(),
                    })
                }
            };
            if weights.is_some() {
                return Err(SpecError::Unsupported {
                    construct: a.to_string(),
                    feature: "only one weights() term is allowed".into(),
                });
            }
            let w = ck.numeric(&name, "weights()")?.as_f64().unwrap_or_default();
            if let Some(i) = w.iter().position(|v| *v < 0.0) {
                return Err(SpecError::BadKind {
                    name,
                    context: "observation weights".into(),
                    expected: "non-negative".into(),
                    found: format!("{} in row {}", w[i], i + 1),
                });
            }
            weights = Some(name);
        }
    }

    let mut predictors = Vec::new();
    for (owner, rhs) in spec.predictors() {
        let role = if spec.is_nonlinear && spec.nlpar_formulas.contains_key(owner) {
            Role::Nlpar
        } else {
            Role::Dpar
        };
        let link = match role {
            Role::Nlpar => Link::Identity,
            Role::Dpar => family
                .link(owner)
                .expect("dpar names are checked at build time"),
        };
        let context = format!("the formula for `{owner}`");
        predictors.push(check_rhs(&mut ck, owner, role, link, rhs, &context)?);
    }

    let blocks = resolve_blocks(spec)?;
    for b in &blocks {
        match &b.grouping {
            Grouping::Factor { vars } => {
                for v in vars {
                    ck.grouping_factor(v)?;
                }
            }
            Grouping::Mm { members, weights } => {
                for m in members {
                    ck.grouping_factor(m)?;
                }
                for w in weights.iter().flatten() {
                    ck.numeric(w, "multi-membership weights")?;
                }
            }
        }
        for c in &b.coefficients {
            if let super::CoefTerm::Term(t) = &c.term {
                ck.terms(std::slice::from_ref(t), "a group-level term")?;
            }
        }
    }

    let mut nl_covariates = Vec::new();
    if let Some(expr) = spec.main_formula.nl_expr() {
        for ident in expr.identifiers() {
            if spec.nlpar_formulas.contains_key(&ident) {
                if d.contains(&ident) {
                    let msg = format!(
                        "`{ident}` is both a data column and a non-linear parameter; the parameter is used"
                    );
                    warn!("{msg}");
                    ck.warnings.push(msg);
                }
                continue;
            }
            if !d.contains(&ident) {
                return Err(SpecError::UnboundNlIdentifier(ident));
            }
            ck.numeric(&ident, "a covariate of the non-linear expression")?;
            nl_covariates.push(ident);
        }
    }

    Ok(CheckedSpec {
        spec: spec.clone(),
        response,
        weights,
        predictors,
        blocks,
        constant_dpars: spec
            .constant_dpars()
            .into_iter()
            .map(String::from)
            .collect(),
        nl_covariates,
        coerced_groupings: ck.coerced,
        warnings: ck.warnings,
    })
}

fn check_rhs(
    ck: &mut Checker<'_>,
    owner: &str,
    role: Role,
    link: Link,
    rhs: &RhsSpec,
    context: &str,
) -> Result<Predictor, SpecError> {
    ck.terms(&rhs.fixed_terms, context)?;
    let mut smooths: Vec<SmoothSpec> = Vec::new();
    for s in &rhs.special_terms {
        let sm = ck.smooth(s, context)?;
        if smooths.iter().any(|o| o.var == sm.var) {
            return Err(SpecError::Unsupported {
                construct: s.to_string(),
                feature: "two smooths of the same variable in one formula".into(),
            });
        }
        smooths.push(sm);
    }
    Ok(Predictor {
        owner: owner.to_string(),
        role,
        link,
        intercept: rhs.intercept,
        fixed_terms: rhs.fixed_terms.clone(),
        smooths,
    })
}
