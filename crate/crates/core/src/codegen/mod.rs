//! Renders a compiled model as a probabilistic program with data,
//! parameters, transformed parameters and model sections.

use std::fmt::Write as _;

use serde::Serialize;

use crate::density::{Posterior, SegmentKind};
use crate::design::DesignSet;
use crate::formula::NlExpr;
use crate::modelspec::{CheckedSpec, Family, Grouping, PriorDensity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgramText {
    pub header: String,
    pub data: String,
    pub parameters: String,
    pub transformed: String,
    pub model: String,
}

impl ProgramText {
    pub fn rendered(&self) -> String {
        let mut out = self.header.clone();
        for (name, body) in [
            ("data", &self.data),
            ("parameters", &self.parameters),
            ("transformed parameters", &self.transformed),
            ("model", &self.model),
        ] {
            let _ = writeln!(out, "{name} {{");
            out.push_str(body);
            out.push_str("}\n");
        }
        out
    }

    /// Identifiers declared in the parameters and transformed parameters
    /// sections, in order.
    pub fn declared(&self) -> (Vec<String>, Vec<String>) {
        (
            declared_names(&self.parameters),
            declared_names(&self.transformed),
        )
    }
}

fn declared_names(section: &str) -> Vec<String> {
    section
        .lines()
        .filter_map(|line| {
            let code = line.split("//").next().unwrap_or("").trim();
            let decl = code.split(';').next()?.split(" = ").next()?.trim();
            if decl.is_empty() {
                return None;
            }
            decl.split_whitespace().last().map(str::to_string)
        })
        .collect()
}

fn suffix(owner: &str) -> String {
    if owner == "mu" {
        String::new()
    } else {
        format!("_{owner}")
    }
}

/// A numeric literal without a trailing `.0`.
fn num(v: f64) -> String {
    format!("{v}")
}

fn lpdf(target: &str, d: &PriorDensity) -> String {
    match *d {
        PriorDensity::Normal { mu, sd } => {
            format!("normal_lpdf({target} | {}, {})", num(mu), num(sd))
        }
        PriorDensity::StudentT { df, mu, sd } => {
            format!(
                "student_t_lpdf({target} | {}, {}, {})",
                num(df),
                num(mu),
                num(sd)
            )
        }
        PriorDensity::HalfStudentT { df, sd } => {
            format!("student_t_lpdf({target} | {}, 0, {})", num(df), num(sd))
        }
        PriorDensity::Lkj { eta } => format!("lkj_corr_cholesky_lpdf({target} | {})", num(eta)),
    }
}

/// Prior of a positive parameter, truncated at zero.
fn positive_prior(target: &str, d: &PriorDensity) -> String {
    let ccdf = match *d {
        PriorDensity::Normal { mu, sd } => format!("normal_lccdf(0 | {}, {})", num(mu), num(sd)),
        PriorDensity::StudentT { df, mu, sd } => {
            format!("student_t_lccdf(0 | {}, {}, {})", num(df), num(mu), num(sd))
        }
        PriorDensity::HalfStudentT { df, sd } => {
            format!("student_t_lccdf(0 | {}, 0, {})", num(df), num(sd))
        }
        PriorDensity::Lkj { .. } => return format!("  target += {};\n", lpdf(target, d)),
    };
    format!("  target += {}\n    - {ccdf};\n", lpdf(target, d))
}

fn indexed(e: &NlExpr, design: &DesignSet) -> NlExpr {
    let rec = |a: &NlExpr| Box::new(indexed(a, design));
    match e {
        NlExpr::Literal(v) => NlExpr::Literal(*v),
        NlExpr::Ident(s) if design.predictor_index(s).is_some() => NlExpr::Ident(format!("{s}[n]")),
        NlExpr::Ident(s) => NlExpr::Ident(format!("C_{s}[n]")),
        NlExpr::Neg(a) => NlExpr::Neg(rec(a)),
        NlExpr::Add(a, b) => NlExpr::Add(rec(a), rec(b)),
        NlExpr::Sub(a, b) => NlExpr::Sub(rec(a), rec(b)),
        NlExpr::Mul(a, b) => NlExpr::Mul(rec(a), rec(b)),
        NlExpr::Div(a, b) => NlExpr::Div(rec(a), rec(b)),
        NlExpr::Pow(a, b) => NlExpr::Pow(rec(a), rec(b)),
        NlExpr::Call(f, a) => NlExpr::Call(*f, rec(a)),
    }
}

/// Emits the program of a compiled model. Output is deterministic.
pub fn emit_program(checked: &CheckedSpec, posterior: &Posterior) -> ProgramText {
    let design = posterior.design();
    let space = posterior.space();
    let priors = posterior.priors();
    let spec = checked.spec();
    let family = design.family;
    let mu_link = family.link("mu").expect("mu link");

    let mut header = format!("// family: {} ({})\n", family.name(), mu_link.name());
    let _ = writeln!(header, "// {}", spec.main_formula);
    for f in spec
        .dpar_formulas
        .values()
        .chain(spec.nlpar_formulas.values())
    {
        let _ = writeln!(header, "// {f}");
    }

    // data
    let mut data = String::from("  int<lower=1> N;  // number of observations\n");
    if family.is_count() {
        data.push_str("  array[N] int<lower=0> Y;  // response\n");
    } else {
        data.push_str("  vector[N] Y;  // response\n");
    }
    let weighted = checked.weights().is_some();
    if weighted {
        data.push_str("  vector<lower=0>[N] weights;\n");
    }
    for (p, pred) in design.predictors.iter().enumerate() {
        let suf = suffix(&pred.owner);
        let cols: Vec<String> = space.beta_names[p]
            .iter()
            .map(|n| {
                n.trim_start_matches("b_")
                    .trim_start_matches("bs_")
                    .to_string()
            })
            .collect();
        let _ = writeln!(
            data,
            "  int<lower=0> K{suf};  // population-level effects of {}",
            pred.owner
        );
        let _ = writeln!(data, "  matrix[N, K{suf}] X{suf};  // {}", cols.join(", "));
    }
    for s in &space.smooths {
        let id = &s.id;
        let _ = writeln!(
            data,
            "  int<lower=1> knots_{id};  // penalized coefficients of {id}"
        );
        let _ = writeln!(data, "  matrix[N, knots_{id}] Zs_{id};");
    }
    for (b, block) in design.random.iter().enumerate() {
        let t = b + 1;
        let _ = writeln!(data, "  // group-level block {t}: {}", block.label());
        let _ = writeln!(data, "  int<lower=1> N_{t};  // number of levels");
        let _ = writeln!(data, "  int<lower=1> M_{t};  // coefficients per level");
        match &block.spec.grouping {
            Grouping::Mm { members, .. } => {
                for k in 1..=members.len() {
                    let _ = writeln!(
                        data,
                        "  array[N] int<lower=1> J_{t}_{k};  // level of member {k}"
                    );
                }
                for k in 1..=members.len() {
                    let _ = writeln!(data, "  vector[N] W_{t}_{k};  // weight of member {k}");
                }
            }
            Grouping::Factor { .. } => {
                let _ = writeln!(data, "  array[N] int<lower=1> J_{t};  // level index");
            }
        }
        for (c, name) in block.coef_names.iter().enumerate() {
            let _ = writeln!(data, "  vector[N] Z_{t}_{};  // {name}", c + 1);
        }
    }
    if let Some(nl) = &design.nl {
        for c in nl.covariates.keys() {
            let _ = writeln!(data, "  vector[N] C_{c};  // covariate `{c}`");
        }
    }

    // parameters
    let mut parameters = String::new();
    for seg in space.segments() {
        let line = match seg.kind {
            SegmentKind::Beta { predictor } => {
                let suf = suffix(&design.predictors[predictor].owner);
                format!("vector[K{suf}] {};  // population-level effects", seg.name)
            }
            SegmentKind::SmoothSd { .. } => {
                format!("real<lower=0> {};  // smooth standard deviation", seg.name)
            }
            SegmentKind::SmoothZ { predictor, smooth } => {
                let id = smooth_id(space, predictor, smooth);
                format!(
                    "vector[knots_{id}] {};  // standardized smooth coefficients",
                    seg.name
                )
            }
            SegmentKind::GroupZ { block } => {
                let t = block + 1;
                format!(
                    "matrix[M_{t}, N_{t}] {};  // standardized group-level effects",
                    seg.name
                )
            }
            SegmentKind::GroupSd { block } => {
                format!(
                    "vector<lower=0>[M_{}] {};  // group-level standard deviations",
                    block + 1,
                    seg.name
                )
            }
            SegmentKind::GroupCor { block } => {
                format!(
                    "cholesky_factor_corr[M_{}] {};  // correlation factor",
                    block + 1,
                    seg.name
                )
            }
            SegmentKind::Sigma => format!(
                "real<lower=0> {};  // residual standard deviation",
                seg.name
            ),
            SegmentKind::Zi => format!(
                "real<lower=0, upper=1> {};  // zero-inflation probability",
                seg.name
            ),
        };
        let _ = writeln!(parameters, "  {line}");
    }

    // transformed parameters
    let mut transformed = String::new();
    for s in &space.smooths {
        let id = &s.id;
        let _ = writeln!(
            transformed,
            "  vector[knots_{id}] s_{id} = sds_{id} * zs_{id};"
        );
    }
    for (b, shape) in space.blocks.iter().enumerate() {
        let t = b + 1;
        let scale = if shape.correlated {
            format!("diag_pre_multiply(sd_{t}, L_{t})")
        } else {
            format!("diag_matrix(sd_{t})")
        };
        let _ = writeln!(
            transformed,
            "  matrix[N_{t}, M_{t}] r_{t} = transpose({scale} * z_{t});"
        );
    }

    // model
    let mut model = String::from("  // linear predictors\n");
    for pred in &design.predictors {
        let suf = suffix(&pred.owner);
        let _ = writeln!(model, "  vector[N] {} = X{suf} * b{suf};", pred.owner);
    }
    if design.nl.is_some() {
        model.push_str("  vector[N] mu;\n");
    }
    for (p, pred) in design.predictors.iter().enumerate() {
        let o = &pred.owner;
        for (s, _) in pred.smooths.iter().enumerate() {
            let id = smooth_id(space, p, s);
            let _ = writeln!(model, "  {o} += Zs_{id} * s_{id};");
        }
    }
    for (b, block) in design.random.iter().enumerate() {
        let t = b + 1;
        model.push_str("  for (n in 1:N) {\n");
        for c in 0..block.q() {
            let owner = &design.predictors[design.random_owner_index[b][c]].owner;
            let k = c + 1;
            let term = match &block.spec.grouping {
                Grouping::Mm { members, .. } => (1..=members.len())
                    .map(|m| format!("W_{t}_{m}[n] * r_{t}[J_{t}_{m}[n], {k}] * Z_{t}_{k}[n]"))
                    .collect::<Vec<_>>()
                    .join("\n      + "),
                Grouping::Factor { .. } => format!("r_{t}[J_{t}[n], {k}] * Z_{t}_{k}[n]"),
            };
            let _ = writeln!(model, "    {owner}[n] += {term};");
        }
        model.push_str("  }\n");
    }
    if let Some(nl) = &design.nl {
        let _ = writeln!(model, "  // non-linear predictor: {}", nl.expr);
        model.push_str("  for (n in 1:N) {\n");
        let _ = writeln!(model, "    mu[n] = {};", indexed(&nl.expr, design));
        model.push_str("  }\n");
    }

    model.push_str("  // priors\n");
    for (p, pred) in design.predictors.iter().enumerate() {
        let suf = suffix(&pred.owner);
        for (k, d) in priors.beta[p].iter().enumerate() {
            if let Some(d) = d {
                let _ = writeln!(
                    model,
                    "  target += {};",
                    lpdf(&format!("b{suf}[{}]", k + 1), d)
                );
            }
        }
    }
    for (s, d) in space.smooths.iter().zip(&priors.smooth_sds) {
        model.push_str(&positive_prior(&format!("sds_{}", s.id), d));
        let _ = writeln!(model, "  target += std_normal_lpdf(zs_{});", s.id);
    }
    for (b, shape) in space.blocks.iter().enumerate() {
        let t = b + 1;
        for (c, d) in priors.sd[b].iter().enumerate() {
            model.push_str(&positive_prior(&format!("sd_{t}[{}]", c + 1), d));
        }
        if shape.correlated {
            let _ = writeln!(
                model,
                "  target += lkj_corr_cholesky_lpdf(L_{t} | {});",
                num(priors.cor_eta[b])
            );
        }
        let _ = writeln!(model, "  target += std_normal_lpdf(to_vector(z_{t}));");
    }
    if let Some(d) = &priors.sigma {
        model.push_str(&positive_prior("sigma", d));
    }
    if design.constant_dpars.iter().any(|d| d == "zi") {
        model.push_str("  target += uniform_lpdf(zi | 0, 1);\n");
    }

    model.push_str("  // likelihood\n");
    let w = |expr: String| {
        if weighted {
            format!("weights[n] * ({expr})")
        } else {
            expr
        }
    };
    match family {
        Family::Gaussian => {
            let sigma_predicted = design.predictor_index("sigma").is_some();
            if weighted || sigma_predicted {
                let s = if sigma_predicted {
                    "exp(sigma[n])"
                } else {
                    "sigma"
                };
                model.push_str("  for (n in 1:N) {\n");
                let _ = writeln!(
                    model,
                    "    target += {};",
                    w(format!("normal_lpdf(Y[n] | mu[n], {s})"))
                );
                model.push_str("  }\n");
            } else {
                model.push_str("  target += normal_lpdf(Y | mu, sigma);\n");
            }
        }
        Family::Poisson => {
            if weighted {
                model.push_str("  for (n in 1:N) {\n");
                let _ = writeln!(
                    model,
                    "    target += {};",
                    w("poisson_log_lpmf(Y[n] | mu[n])".into())
                );
                model.push_str("  }\n");
            } else {
                model.push_str("  target += poisson_log_lpmf(Y | mu);\n");
            }
        }
        Family::ZeroInflatedPoisson => {
            let (log_zi, log_keep) = if design.predictor_index("zi").is_some() {
                ("log_inv_logit(zi[n])", "log1m_inv_logit(zi[n])")
            } else {
                ("log(zi)", "log1m(zi)")
            };
            model.push_str("  for (n in 1:N) {\n    if (Y[n] == 0) {\n");
            let _ = writeln!(
                model,
                "      target += {};",
                w(format!(
                    "log_sum_exp({log_zi}, {log_keep} + poisson_log_lpmf(0 | mu[n]))"
                ))
            );
            model.push_str("    } else {\n");
            let _ = writeln!(
                model,
                "      target += {};",
                w(format!("{log_keep} + poisson_log_lpmf(Y[n] | mu[n])"))
            );
            model.push_str("    }\n  }\n");
        }
    }

    ProgramText {
        header,
        data,
        parameters,
        transformed,
        model,
    }
}

fn smooth_id(space: &crate::density::ParamSpace, predictor: usize, smooth: usize) -> String {
    space
        .smooths
        .iter()
        .find(|s| s.predictor == predictor && s.smooth == smooth)
        .map(|s| s.id.clone())
        .expect("smooth shape")
}
