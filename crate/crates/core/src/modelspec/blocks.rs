use std::collections::HashMap;
use std::fmt;

use serde::{Serialize, Serializer};

use super::expand::{expand_group_expr, Grouping};
use super::{ModelSpec, SpecError};
use crate::formula::{Bar, FixedTerm};

/// A term inside a group-level effect: the intercept or a population-style term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CoefTerm {
    Intercept,
    Term(FixedTerm),
}

impl CoefTerm {
    pub fn label(&self) -> String {
        match self {
            CoefTerm::Intercept => "Intercept".into(),
            CoefTerm::Term(t) => t.label(),
        }
    }
}

impl Serialize for CoefTerm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct BlockCoef {
    pub owner: String,
    pub term: CoefTerm,
}

impl fmt::Display for BlockCoef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            super::coef_prefix(&self.owner),
            self.term.label()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupBlockSpec {
    pub grouping: Grouping,
    pub coefficients: Vec<BlockCoef>,
    pub correlated: bool,
    pub id: Option<String>,
}

/// Groups every expanded group-level term into correlation blocks. Terms
/// sharing an ID and a grouping are merged; all others get their own block.
pub fn resolve_blocks(spec: &ModelSpec) -> Result<Vec<GroupBlockSpec>, SpecError> {
    let mut blocks: Vec<GroupBlockSpec> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (owner, rhs) in spec.predictors() {
        for term in &rhs.group_terms {
            let mut coefs = Vec::new();
            if term.inner.intercept {
                coefs.push(BlockCoef {
                    owner: owner.to_string(),
                    term: CoefTerm::Intercept,
                });
            }
            for t in &term.inner.fixed_terms {
                coefs.push(BlockCoef {
                    owner: owner.to_string(),
                    term: CoefTerm::Term(t.clone()),
                });
            }
            if let Some(s) = term.inner.special_terms.first() {
                return Err(SpecError::Unsupported {
                    construct: s.to_string(),
                    feature: "special terms inside group-level terms".into(),
                });
            }
            if coefs.is_empty() {
                return Err(SpecError::EmptyGroupTerm(term.group.to_string()));
            }
            let correlated = term.bar == Bar::Correlated;
            for grouping in expand_group_expr(&term.group)? {
                let Some(id) = &term.id else {
                    blocks.push(GroupBlockSpec {
                        grouping,
                        coefficients: coefs.clone(),
                        correlated,
                        id: None,
                    });
                    continue;
                };
                match by_id.get(id) {
                    Some(&ix) => {
                        let block = &mut blocks[ix];
                        if block.grouping != grouping {
                            return Err(SpecError::IdConflict {
                                id: id.clone(),
                                first: block.grouping.label(),
                                second: grouping.label(),
                            });
                        }
                        if block.correlated != correlated {
                            return Err(SpecError::IdBarConflict(id.clone()));
                        }
                        for c in &coefs {
                            if block.coefficients.contains(c) {
                                return Err(SpecError::DuplicateCoefficient {
                                    coef: c.to_string(),
                                    group: grouping.label(),
                                });
                            }
                            block.coefficients.push(c.clone());
                        }
                    }
                    None => {
                        by_id.insert(id.clone(), blocks.len());
                        blocks.push(GroupBlockSpec {
                            grouping,
                            coefficients: coefs.clone(),
                            correlated,
                            id: Some(id.clone()),
                        });
                    }
                }
            }
        }
    }
    Ok(blocks)
}
