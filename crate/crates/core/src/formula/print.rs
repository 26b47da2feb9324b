use std::fmt::{self, Write};

use super::{Arg, ArgValue, Bar, FormulaAst, GroupExpr, NlExpr, Rhs, RhsSpec};

pub(super) fn write_formula(ast: &FormulaAst, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if let Some(resp) = &ast.response {
        f.write_str(&resp.variables.join(" + "))?;
        if !resp.aterms.is_empty() {
            f.write_str(" | ")?;
            for (i, a) in resp.aterms.iter().enumerate() {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                write!(f, "{a}")?;
            }
        }
        f.write_str(" ")?;
    }
    f.write_str("~ ")?;
    match &ast.rhs {
        Rhs::Terms(t) => write_rhs(t, f),
        Rhs::Nonlinear(e) => write_nl(e, f),
    }
}

pub(super) fn write_rhs(spec: &RhsSpec, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mut parts: Vec<String> = Vec::new();
    let has_terms = !(spec.fixed_terms.is_empty()
        && spec.group_terms.is_empty()
        && spec.special_terms.is_empty());
    if !spec.intercept {
        parts.push("0".into());
    } else if !has_terms {
        parts.push("1".into());
    }
    parts.extend(spec.fixed_terms.iter().map(|t| t.label()));
    parts.extend(spec.special_terms.iter().map(|t| t.to_string()));
    for g in &spec.group_terms {
        let bar = match (g.bar, &g.id) {
            (Bar::Uncorrelated, _) => " || ".to_string(),
            (Bar::Correlated, Some(id)) => format!(" |{id}| "),
            (Bar::Correlated, None) => " | ".to_string(),
        };
        parts.push(format!("({}{bar}{})", g.inner, g.group));
    }
    f.write_str(&parts.join(" + "))
}

pub(super) fn write_call(name: &str, args: &[Arg], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        if let Some(n) = &a.name {
            write!(f, "{n} = ")?;
        }
        match &a.value {
            ArgValue::Ident(s) => f.write_str(s)?,
            ArgValue::Number(v) => write!(f, "{v}")?,
        }
    }
    f.write_char(')')
}

fn group_prec(e: &GroupExpr) -> u8 {
    match e {
        GroupExpr::Plus(..) => 1,
        GroupExpr::Slash(..) => 2,
        GroupExpr::Colon(..) => 3,
        _ => 4,
    }
}

fn write_group_operand(e: &GroupExpr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if group_prec(e) < min {
        write!(f, "(")?;
        write_group_expr(e, f)?;
        write!(f, ")")
    } else {
        write_group_expr(e, f)
    }
}

pub(super) fn write_group_expr(e: &GroupExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // binary nodes fold to the left, so a right operand of equal
    // precedence needs parentheses
    let binary = |l: &GroupExpr, r: &GroupExpr, op: &str, p: u8, f: &mut fmt::Formatter<'_>| {
        write_group_operand(l, p, f)?;
        f.write_str(op)?;
        write_group_operand(r, p + 1, f)
    };
    match e {
        GroupExpr::Var(v) => f.write_str(v),
        GroupExpr::Plus(l, r) => binary(l, r, " + ", 1, f),
        GroupExpr::Slash(l, r) => binary(l, r, "/", 2, f),
        GroupExpr::Colon(l, r) => binary(l, r, ":", 3, f),
        GroupExpr::Gr(inner) => {
            f.write_str("gr(")?;
            write_group_expr(inner, f)?;
            f.write_str(")")
        }
        GroupExpr::Mm { members, weights } => {
            write!(f, "mm({}", members.join(", "))?;
            if let Some(w) = weights {
                write!(f, ", weights = cbind({})", w.join(", "))?;
            }
            f.write_str(")")
        }
    }
}

fn nl_prec(e: &NlExpr) -> u8 {
    match e {
        NlExpr::Add(..) | NlExpr::Sub(..) => 1,
        NlExpr::Mul(..) | NlExpr::Div(..) => 2,
        NlExpr::Neg(_) => 3,
        NlExpr::Pow(..) => 4,
        NlExpr::Literal(_) | NlExpr::Ident(_) | NlExpr::Call(..) => 5,
    }
}

fn write_nl_operand(e: &NlExpr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if nl_prec(e) < min {
        f.write_char('(')?;
        write_nl(e, f)?;
        f.write_char(')')
    } else {
        write_nl(e, f)
    }
}

fn write_exponent(e: &NlExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        NlExpr::Neg(inner) => {
            f.write_char('-')?;
            write_exponent(inner, f)
        }
        other => write_nl_operand(other, 4, f),
    }
}

/// Prints with the minimal parentheses needed to reparse the same tree.
pub(super) fn write_nl(e: &NlExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        NlExpr::Literal(v) => write!(f, "{v}"),
        NlExpr::Ident(s) => f.write_str(s),
        NlExpr::Neg(a) => {
            f.write_char('-')?;
            write_nl_operand(a, 3, f)
        }
        NlExpr::Add(a, b) | NlExpr::Sub(a, b) => {
            write_nl_operand(a, 1, f)?;
            f.write_str(if matches!(e, NlExpr::Add(..)) {
                " + "
            } else {
                " - "
            })?;
            write_nl_operand(b, 2, f)
        }
        NlExpr::Mul(a, b) | NlExpr::Div(a, b) => {
            write_nl_operand(a, 2, f)?;
            f.write_str(if matches!(e, NlExpr::Mul(..)) {
                " * "
            } else {
                " / "
            })?;
            write_nl_operand(b, 3, f)
        }
        NlExpr::Pow(a, b) => {
            write_nl_operand(a, 5, f)?;
            f.write_char('^')?;
            write_exponent(b, f)
        }
        NlExpr::Call(fun, a) => {
            write!(f, "{}(", fun.name())?;
            write_nl(a, f)?;
            f.write_char(')')
        }
    }
}
