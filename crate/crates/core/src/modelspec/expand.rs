use std::fmt;

use serde::Serialize;

use super::SpecError;
use crate::formula::GroupExpr;

/// A grouping after expansion: a single factor, an ordered combination of
/// factors (`g1:g2`), or a multi-membership structure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Grouping {
    Factor {
        vars: Vec<String>,
    },
    Mm {
        members: Vec<String>,
        weights: Option<Vec<String>>,
    },
}

impl Grouping {
    pub fn factor(vars: &[&str]) -> Grouping {
        Grouping::Factor {
            vars: vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Display label: `g1:g2` for factor combinations, `mms1s2` for mm.
    pub fn label(&self) -> String {
        match self {
            Grouping::Factor { vars } => vars.join(":"),
            Grouping::Mm { members, .. } => format!("mm{}", members.concat()),
        }
    }

    /// Every data column this grouping reads.
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Grouping::Factor { vars } => vars.iter().map(String::as_str).collect(),
            Grouping::Mm { members, weights } => members
                .iter()
                .chain(weights.iter().flatten())
                .map(String::as_str)
                .collect(),
        }
    }

    pub fn to_expr(&self) -> GroupExpr {
        match self {
            Grouping::Factor { vars } => {
                let mut it = vars.iter().map(|v| GroupExpr::Var(v.clone()));
                let first = it
                    .next()
                    .expect("factor grouping has at least one variable");
                it.fold(first, |acc, v| GroupExpr::Colon(Box::new(acc), Box::new(v)))
            }
            Grouping::Mm { members, weights } => GroupExpr::Mm {
                members: members.clone(),
                weights: weights.clone(),
            },
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

/// Rewrites a grouping expression into its canonical groupings:
/// `g1/g2` becomes `g1` and `g1:g2`, `a + b` the union of both sides,
/// `gr(g)` just `g`. Duplicates are dropped, first occurrence wins.
pub fn expand_group_expr(e: &GroupExpr) -> Result<Vec<Grouping>, SpecError> {
    if let GroupExpr::Mm { members, weights } = e {
        return Ok(vec![Grouping::Mm {
            members: members.clone(),
            weights: weights.clone(),
        }]);
    }
    Ok(expand_factors(e)?
        .into_iter()
        .map(|vars| Grouping::Factor { vars })
        .collect())
}

fn push_unique<T: PartialEq>(out: &mut Vec<T>, item: T) {
    if !out.contains(&item) {
        out.push(item);
    }
}

fn combine(a: &[String], b: &[String]) -> Vec<String> {
    let mut out = a.to_vec();
    for v in b {
        push_unique(&mut out, v.clone());
    }
    out
}

fn all_vars(e: &GroupExpr, out: &mut Vec<String>) {
    match e {
        GroupExpr::Var(v) => push_unique(out, v.clone()),
        GroupExpr::Colon(a, b) | GroupExpr::Slash(a, b) | GroupExpr::Plus(a, b) => {
            all_vars(a, out);
            all_vars(b, out);
        }
        GroupExpr::Gr(inner) => all_vars(inner, out),
        GroupExpr::Mm { .. } => {}
    }
}

fn expand_factors(e: &GroupExpr) -> Result<Vec<Vec<String>>, SpecError> {
    match e {
        GroupExpr::Var(v) => Ok(vec![vec![v.clone()]]),
        GroupExpr::Gr(inner) => expand_factors(inner),
        GroupExpr::Plus(a, b) => {
            let mut out = expand_factors(a)?;
            for g in expand_factors(b)? {
                push_unique(&mut out, g);
            }
            Ok(out)
        }
        GroupExpr::Colon(a, b) => {
            let left = expand_factors(a)?;
            let right = expand_factors(b)?;
            let mut out = Vec::new();
            for l in &left {
                for r in &right {
                    push_unique(&mut out, combine(l, r));
                }
            }
            Ok(out)
        }
        GroupExpr::Slash(a, b) => {
            let mut out = expand_factors(a)?;
            let mut outer = Vec::new();
            all_vars(a, &mut outer);
            for r in expand_factors(b)? {
                push_unique(&mut out, combine(&outer, &r));
            }
            Ok(out)
        }
        GroupExpr::Mm { .. } => Err(SpecError::NestedMm(e.to_string())),
    }
}
