use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::SpecError;
use crate::formula::{tokenize, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum PriorDensity {
    Normal { mu: f64, sd: f64 },
    StudentT { df: f64, mu: f64, sd: f64 },
    Lkj { eta: f64 },
    HalfStudentT { df: f64, sd: f64 },
}

impl PriorDensity {
    pub fn check(&self) -> Result<(), SpecError> {
        let bad = |what: &str| {
            Err(SpecError::InvalidPrior(format!(
                "{what} must be positive in {self}"
            )))
        };
        match *self {
            PriorDensity::Normal { mu, sd } => {
                if !(sd > 0.0 && sd.is_finite()) {
                    return bad("sd");
                }
                if !mu.is_finite() {
                    return Err(SpecError::InvalidPrior(format!(
                        "non-finite location in {self}"
                    )));
                }
            }
            PriorDensity::StudentT { df, mu, sd } => {
                if !(df > 0.0) {
                    return bad("df");
                }
                if !(sd > 0.0 && sd.is_finite()) {
                    return bad("sd");
                }
                if !mu.is_finite() {
                    return Err(SpecError::InvalidPrior(format!(
                        "non-finite location in {self}"
                    )));
                }
            }
            PriorDensity::Lkj { eta } => {
                if !(eta > 0.0 && eta.is_finite()) {
                    return bad("eta");
                }
            }
            PriorDensity::HalfStudentT { df, sd } => {
                if !(df > 0.0) {
                    return bad("df");
                }
                if !(sd > 0.0 && sd.is_finite()) {
                    return bad("sd");
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for PriorDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorDensity::Normal { mu, sd } => write!(f, "normal({mu}, {sd})"),
            PriorDensity::StudentT { df, mu, sd } => write!(f, "student_t({df}, {mu}, {sd})"),
            PriorDensity::Lkj { eta } => write!(f, "lkj({eta})"),
            PriorDensity::HalfStudentT { df, sd } => write!(f, "half_student_t({df}, 0, {sd})"),
        }
    }
}

/// What a prior applies to. `None` fields act as wildcards.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum PriorTarget {
    /// Population-level coefficient of `owner` (`mu`, a dpar or an nlpar).
    Coefficient {
        owner: String,
        name: Option<String>,
    },
    Intercept {
        owner: String,
    },
    Sd {
        group: Option<String>,
        coef: Option<String>,
    },
    Cor {
        group: Option<String>,
    },
    Sigma,
    Sds {
        smooth: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorSpec {
    pub density: PriorDensity,
    pub target: PriorTarget,
}

impl PriorSpec {
    pub fn new(density: PriorDensity, target: PriorTarget) -> Self {
        PriorSpec { density, target }
    }

    pub fn normal(mu: f64, sd: f64) -> PriorDensity {
        PriorDensity::Normal { mu, sd }
    }

    pub fn check(&self) -> Result<(), SpecError> {
        self.density.check()?;
        let is_lkj = matches!(self.density, PriorDensity::Lkj { .. });
        let is_cor = matches!(self.target, PriorTarget::Cor { .. });
        if is_lkj != is_cor {
            return Err(SpecError::InvalidPrior(format!(
                "lkj priors apply to correlations only, got {self}"
            )));
        }
        Ok(())
    }

    /// Ordering key for how specific a prior is; higher wins.
    pub(crate) fn specificity(&self) -> u8 {
        match &self.target {
            PriorTarget::Coefficient { name: Some(_), .. } => 3,
            PriorTarget::Intercept { .. } => 2,
            PriorTarget::Coefficient { name: None, .. } => 1,
            PriorTarget::Sd { group, coef } => group.is_some() as u8 + 2 * coef.is_some() as u8,
            PriorTarget::Cor { group } | PriorTarget::Sds { smooth: group } => {
                group.is_some() as u8
            }
            PriorTarget::Sigma => 0,
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.density)?;
        let owner_arg = |owner: &str| {
            if owner == "mu" {
                String::new()
            } else {
                format!(", owner = {owner}")
            }
        };
        match &self.target {
            PriorTarget::Coefficient { owner, name } => {
                write!(f, ", class = b")?;
                if let Some(n) = name {
                    write!(f, ", coef = {n}")?;
                }
                write!(f, "{}", owner_arg(owner))
            }
            PriorTarget::Intercept { owner } => {
                write!(f, ", class = Intercept{}", owner_arg(owner))
            }
            PriorTarget::Sd { group, coef } => {
                write!(f, ", class = sd")?;
                if let Some(g) = group {
                    write!(f, ", group = {g}")?;
                }
                if let Some(c) = coef {
                    write!(f, ", coef = {c}")?;
                }
                Ok(())
            }
            PriorTarget::Cor { group } => {
                write!(f, ", class = cor")?;
                if let Some(g) = group {
                    write!(f, ", group = {g}")?;
                }
                Ok(())
            }
            PriorTarget::Sigma => write!(f, ", class = sigma"),
            PriorTarget::Sds { smooth } => {
                write!(f, ", class = sds")?;
                if let Some(s) = smooth {
                    write!(f, ", coef = {s}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `normal(5000, 1000), nlpar = ult`, `lkj(2), class = cor`,
/// `student_t(3, 0, 5), class = sd, group = AY` and similar.
impl FromStr for PriorSpec {
    type Err = SpecError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let cleaned: String = text.chars().filter(|c| *c != '"' && *c != '\'').collect();
        let err = |msg: String| SpecError::InvalidPrior(format!("{msg} in `{text}`"));
        let tokens = tokenize(&cleaned).map_err(|e| err(e.message))?;
        let mut it = tokens.into_iter().map(|t| t.kind).peekable();

        let dist = match it.next() {
            Some(TokenKind::Ident(s)) => s,
            _ => return Err(err("expected a density name".into())),
        };
        if it.next() != Some(TokenKind::LParen) {
            return Err(err("expected `(` after the density name".into()));
        }
        let mut args = Vec::new();
        loop {
            let negative = it.peek() == Some(&TokenKind::Minus);
            if negative {
                it.next();
            }
            match it.next() {
                Some(TokenKind::Number(n)) => {
                    let v: f64 = n.parse().map_err(|_| err(format!("bad number `{n}`")))?;
                    args.push(if negative { -v } else { v });
                }
                Some(TokenKind::RParen) if args.is_empty() && !negative => break,
                _ => return Err(err("expected a numeric argument".into())),
            }
            match it.next() {
                Some(TokenKind::Comma) => continue,
                Some(TokenKind::RParen) => break,
                _ => return Err(err("expected `,` or `)`".into())),
            }
        }
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(err(format!(
                    "{dist} takes {n} arguments, got {}",
                    args.len()
                )))
            }
        };
        let density = match dist.as_str() {
            "normal" => {
                arity(2)?;
                PriorDensity::Normal {
                    mu: args[0],
                    sd: args[1],
                }
            }
            "student_t" => {
                arity(3)?;
                PriorDensity::StudentT {
                    df: args[0],
                    mu: args[1],
                    sd: args[2],
                }
            }
            "lkj" => {
                arity(1)?;
                PriorDensity::Lkj { eta: args[0] }
            }
            "half_student_t" => match args.len() {
                2 => PriorDensity::HalfStudentT {
                    df: args[0],
                    sd: args[1],
                },
                3 if args[1] == 0.0 => PriorDensity::HalfStudentT {
                    df: args[0],
                    sd: args[2],
                },
                3 => return Err(err("half_student_t must be centred at 0".into())),
                n => {
                    return Err(err(format!(
                        "half_student_t takes 2 or 3 arguments, got {n}"
                    )))
                }
            },
            other => return Err(err(format!("unknown prior density `{other}`"))),
        };

        let mut class: Option<String> = None;
        let mut coef: Option<String> = None;
        let mut group: Option<String> = None;
        let mut owner: Option<String> = None;
        while let Some(tok) = it.next() {
            if tok != TokenKind::Comma {
                return Err(err(format!("unexpected {}", tok.describe())));
            }
            let key = match it.next() {
                Some(TokenKind::Ident(k)) => k,
                _ => return Err(err("expected `key = value`".into())),
            };
            if it.next() != Some(TokenKind::Equals) {
                return Err(err(format!("expected `=` after `{key}`")));
            }
            let value = match it.next() {
                Some(TokenKind::Ident(v)) | Some(TokenKind::Number(v)) => v,
                _ => return Err(err(format!("expected a value for `{key}`"))),
            };
            let slot = match key.as_str() {
                "class" => &mut class,
                "coef" => &mut coef,
                "group" => &mut group,
                "nlpar" | "dpar" | "owner" => &mut owner,
                other => return Err(err(format!("unknown prior argument `{other}`"))),
            };
            if slot.replace(value).is_some() {
                return Err(err(format!("`{key}` given twice")));
            }
        }

        let class = class.unwrap_or_else(|| {
            if matches!(density, PriorDensity::Lkj { .. }) {
                "cor"
            } else {
                "b"
            }
            .to_string()
        });
        let owner_or_mu = owner.clone().unwrap_or_else(|| "mu".to_string());
        let no_owner = |c: &str| {
            if owner.is_some() {
                Err(err(format!("class `{c}` does not take nlpar/dpar")))
            } else {
                Ok(())
            }
        };
        let target = match class.as_str() {
            "b" => PriorTarget::Coefficient {
                owner: owner_or_mu,
                name: coef,
            },
            "Intercept" => PriorTarget::Intercept { owner: owner_or_mu },
            "sd" => {
                no_owner("sd")?;
                PriorTarget::Sd { group, coef }
            }
            "cor" => {
                no_owner("cor")?;
                PriorTarget::Cor { group }
            }
            "sigma" => {
                no_owner("sigma")?;
                PriorTarget::Sigma
            }
            "sds" => {
                no_owner("sds")?;
                PriorTarget::Sds { smooth: coef }
            }
            other => return Err(err(format!("unknown prior class `{other}`"))),
        };
        let spec = PriorSpec { density, target };
        spec.check()?;
        Ok(spec)
    }
}
