//! The extended multilevel formula language.
//!
//! A formula is `response | aterms ~ rhs`. In standard mode the right-hand
//! side is a sum of population-level terms, special terms such as `s(x)`,
//! and group-level terms `(inner | group)`, `(inner || group)` or
//! `(inner |ID| group)`. Grouping expressions combine factors with `:`,
//! `/` and `+`, optionally wrapped in `gr(...)` or `mm(...)`.
//!
//! In non-linear mode the right-hand side is an arithmetic expression taken
//! literally, see [`NlExpr`].

mod lexer;
mod parser;
mod print;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use lexer::{tokenize, Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at {}..{}", span.start, span.end)]
pub struct ParseError {
    pub message: String,
    pub span: Span,
}

impl ParseError {
    pub fn new(message: impl Into<String>, span: Span) -> Self {
        ParseError {
            message: message.into(),
            span,
        }
    }

    /// Renders the error with a caret line under the offending text.
    pub fn render(&self, text: &str) -> String {
        let start = self.span.start.min(text.len());
        let width = self.span.end.saturating_sub(self.span.start).max(1);
        format!(
            "error: {}\n  {}\n  {}{}",
            self.message,
            text,
            " ".repeat(text[..start].chars().count()),
            "^".repeat(width)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Standard,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaAst {
    pub response: Option<ResponseSpec>,
    pub rhs: Rhs,
    pub raw_text: String,
}

impl FormulaAst {
    /// Left-hand side names; several names form the combined-lhs shorthand.
    pub fn lhs_names(&self) -> &[String] {
        self.response
            .as_ref()
            .map(|r| r.variables.as_slice())
            .unwrap_or(&[])
    }

    pub fn terms(&self) -> Option<&RhsSpec> {
        match &self.rhs {
            Rhs::Terms(t) => Some(t),
            Rhs::Nonlinear(_) => None,
        }
    }

    pub fn nl_expr(&self) -> Option<&NlExpr> {
        match &self.rhs {
            Rhs::Nonlinear(e) => Some(e),
            Rhs::Terms(_) => None,
        }
    }

    /// Structural equality ignoring the recorded source text.
    pub fn same_structure(&self, other: &FormulaAst) -> bool {
        self.response == other.response && self.rhs == other.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseSpec {
    pub variables: Vec<String>,
    pub aterms: Vec<ATerm>,
}

/// Registered addition-term functions. Only `weights` has downstream
/// semantics; the rest parse and are rejected at validation time.
pub const ATERM_FUNCTIONS: &[&str] = &["weights", "se", "cens", "trunc", "dec"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ATerm {
    pub fun: String,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arg {
    pub name: Option<String>,
    pub value: ArgValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgValue {
    Ident(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rhs {
    Terms(RhsSpec),
    Nonlinear(NlExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhsSpec {
    pub intercept: bool,
    pub fixed_terms: Vec<FixedTerm>,
    pub group_terms: Vec<GroupTermRaw>,
    pub special_terms: Vec<SpecialTerm>,
}

impl Default for RhsSpec {
    fn default() -> Self {
        RhsSpec {
            intercept: true,
            fixed_terms: Vec::new(),
            group_terms: Vec::new(),
            special_terms: Vec::new(),
        }
    }
}

/// A main effect (one variable) or an interaction `a:b:...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FixedTerm {
    pub vars: Vec<String>,
}

impl FixedTerm {
    pub fn label(&self) -> String {
        self.vars.join(":")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bar {
    Correlated,
    Uncorrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTermRaw {
    pub inner: RhsSpec,
    pub bar: Bar,
    pub id: Option<String>,
    pub group: GroupExpr,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupExpr {
    Var(String),
    Colon(Box<GroupExpr>, Box<GroupExpr>),
    Slash(Box<GroupExpr>, Box<GroupExpr>),
    Plus(Box<GroupExpr>, Box<GroupExpr>),
    Gr(Box<GroupExpr>),
    Mm {
        members: Vec<String>,
        weights: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecialFun {
    S,
    T2,
    Cs,
    Mo,
    Me,
    Gp,
}

impl SpecialFun {
    pub fn from_name(name: &str) -> Option<SpecialFun> {
        Some(match name {
            "s" => SpecialFun::S,
            "t2" => SpecialFun::T2,
            "cs" => SpecialFun::Cs,
            "mo" => SpecialFun::Mo,
            "me" => SpecialFun::Me,
            "gp" => SpecialFun::Gp,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SpecialFun::S => "s",
            SpecialFun::T2 => "t2",
            SpecialFun::Cs => "cs",
            SpecialFun::Mo => "mo",
            SpecialFun::Me => "me",
            SpecialFun::Gp => "gp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialTerm {
    pub fun: SpecialFun,
    pub args: Vec<Arg>,
}

impl SpecialTerm {
    /// Positional identifier arguments, i.e. the covariates.
    pub fn variables(&self) -> Vec<&str> {
        self.args
            .iter()
            .filter(|a| a.name.is_none())
            .filter_map(|a| match &a.value {
                ArgValue::Ident(s) => Some(s.as_str()),
                ArgValue::Number(_) => None,
            })
            .collect()
    }

    pub fn named_number(&self, key: &str) -> Option<f64> {
        self.args.iter().find_map(|a| match (&a.name, &a.value) {
            (Some(n), ArgValue::Number(v)) if n == key => Some(*v),
            _ => None,
        })
    }

    /// `s(area)` -> `sarea`, the stem used for parameter names.
    pub fn label(&self) -> String {
        format!("{}{}", self.fun.name(), self.variables().concat())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NlFun {
    Exp,
    Log,
}

impl NlFun {
    pub fn name(self) -> &'static str {
        match self {
            NlFun::Exp => "exp",
            NlFun::Log => "log",
        }
    }
}

/// Literal non-linear predictor. Precedence from loosest to tightest:
/// `+ -`, `* /`, unary minus, `^` (right-associative), so `-a^b` is
/// `-(a^b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NlExpr {
    Literal(f64),
    Ident(String),
    Neg(Box<NlExpr>),
    Add(Box<NlExpr>, Box<NlExpr>),
    Sub(Box<NlExpr>, Box<NlExpr>),
    Mul(Box<NlExpr>, Box<NlExpr>),
    Div(Box<NlExpr>, Box<NlExpr>),
    Pow(Box<NlExpr>, Box<NlExpr>),
    Call(NlFun, Box<NlExpr>),
}

impl NlExpr {
    /// Distinct identifiers in order of first appearance.
    pub fn identifiers(&self) -> Vec<String> {
        fn walk(e: &NlExpr, out: &mut Vec<String>) {
            match e {
                NlExpr::Literal(_) => {}
                NlExpr::Ident(s) => {
                    if !out.contains(s) {
                        out.push(s.clone());
                    }
                }
                NlExpr::Neg(a) | NlExpr::Call(_, a) => walk(a, out),
                NlExpr::Add(a, b)
                | NlExpr::Sub(a, b)
                | NlExpr::Mul(a, b)
                | NlExpr::Div(a, b)
                | NlExpr::Pow(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Evaluates with every identifier bound through `lookup`.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> f64) -> f64 {
        match self {
            NlExpr::Literal(v) => *v,
            NlExpr::Ident(s) => lookup(s),
            NlExpr::Neg(a) => -a.eval_with(lookup),
            NlExpr::Add(a, b) => a.eval_with(lookup) + b.eval_with(lookup),
            NlExpr::Sub(a, b) => a.eval_with(lookup) - b.eval_with(lookup),
            NlExpr::Mul(a, b) => a.eval_with(lookup) * b.eval_with(lookup),
            NlExpr::Div(a, b) => a.eval_with(lookup) / b.eval_with(lookup),
            NlExpr::Pow(a, b) => a.eval_with(lookup).powf(b.eval_with(lookup)),
            NlExpr::Call(NlFun::Exp, a) => a.eval_with(lookup).exp(),
            NlExpr::Call(NlFun::Log, a) => a.eval_with(lookup).ln(),
        }
    }
}

/// Parses a full formula (`lhs ~ rhs`, or one-sided `~ rhs`).
pub fn parse_formula(text: &str, mode: ParseMode) -> Result<FormulaAst, ParseError> {
    parser::Parser::new(text)?.formula(mode)
}

/// Parses a bare non-linear expression without `~`.
pub fn parse_nl_expression(text: &str) -> Result<NlExpr, ParseError> {
    parser::Parser::new(text)?.nl_only()
}

/// Parses a bare right-hand side in standard mode.
pub fn parse_rhs(text: &str) -> Result<RhsSpec, ParseError> {
    parser::Parser::new(text)?.rhs_only()
}

/// Deterministic JSON rendering used by golden tests and the CLI.
pub fn ast_json(ast: &FormulaAst) -> String {
    serde_json::to_string_pretty(ast).expect("AST serializes")
}

impl fmt::Display for FormulaAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_formula(self, f)
    }
}

impl fmt::Display for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_rhs(self, f)
    }
}

impl fmt::Display for GroupExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_group_expr(self, f)
    }
}

impl fmt::Display for NlExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_nl(self, f)
    }
}

impl fmt::Display for SpecialTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_call(self.fun.name(), &self.args, f)
    }
}

impl fmt::Display for ATerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_call(&self.fun, &self.args, f)
    }
}

#[cfg(test)]
mod tests;
