use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::diagnostics::{ess, mean_sd, sorted_quantile, split_rhat};
use super::Draws;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Draw-file name, e.g. `sd_AY__ult_Intercept`.
    pub param: String,
    /// Printed name, e.g. `sd(ult_Intercept)`.
    pub label: String,
    pub estimate: f64,
    pub est_error: f64,
    pub l95: f64,
    pub u95: f64,
    pub ess: f64,
    pub rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowGroup {
    /// `~AY (Number of levels: 10)` for group-level blocks.
    pub heading: Option<String>,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummarySection {
    pub title: String,
    pub groups: Vec<RowGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub sections: Vec<SummarySection>,
    pub chains: usize,
    pub total_draws: usize,
    pub divergences: usize,
    pub treedepth_hits: usize,
}

/// Model description printed above the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitHeader {
    /// e.g. `zero_inflated_poisson (log)`.
    pub family: String,
    pub formulas: Vec<String>,
    pub data_name: String,
    pub n_obs: usize,
    pub chains: usize,
    pub iter: usize,
    pub warmup: usize,
    pub thin: usize,
}

fn row(draws: &Draws, p: usize, label: String) -> SummaryRow {
    let mut pooled = draws.pooled(p);
    let (estimate, est_error) = mean_sd(&pooled);
    pooled.sort_by(f64::total_cmp);
    let series = draws.chain_series(p);
    let constant = est_error == 0.0;
    SummaryRow {
        param: draws.names[p].clone(),
        label,
        estimate,
        est_error,
        l95: sorted_quantile(&pooled, 0.025),
        u95: sorted_quantile(&pooled, 0.975),
        ess: if constant { f64::NAN } else { ess(&series) },
        rhat: split_rhat(&series),
    }
}

enum Class {
    Smooth,
    Group(String),
    Population,
    Family,
    Hidden,
}

fn classify(name: &str) -> (Class, String) {
    if let Some(id) = name.strip_prefix("sds_") {
        return (Class::Smooth, format!("sds({id})"));
    }
    if let Some(rest) = name.strip_prefix("sd_") {
        if let Some((label, coef)) = rest.split_once("__") {
            return (Class::Group(label.to_string()), format!("sd({coef})"));
        }
    }
    if let Some(rest) = name.strip_prefix("cor_") {
        let parts: Vec<&str> = rest.splitn(3, "__").collect();
        if let [label, a, b] = parts[..] {
            return (Class::Group(label.to_string()), format!("cor({a},{b})"));
        }
    }
    if let Some(coef) = name.strip_prefix("b_").or_else(|| name.strip_prefix("bs_")) {
        return (Class::Population, coef.to_string());
    }
    if name == "sigma" || name == "zi" {
        return (Class::Family, name.to_string());
    }
    (Class::Hidden, name.to_string())
}

/// Posterior summaries grouped into smooth terms, group-level effects,
/// population-level effects and family-specific parameters. Group effects
/// and smooth coefficients themselves are not listed.
pub fn summarize(draws: &Draws) -> SummaryTable {
    let mut smooth = Vec::new();
    let mut groups: IndexMap<String, Vec<SummaryRow>> = IndexMap::new();
    let mut population = Vec::new();
    let mut family = Vec::new();
    for (p, name) in draws.names.iter().enumerate() {
        let (class, label) = classify(name);
        match class {
            Class::Smooth => smooth.push(row(draws, p, label)),
            Class::Group(g) => groups.entry(g).or_default().push(row(draws, p, label)),
            Class::Population => population.push(row(draws, p, label)),
            Class::Family => family.push(row(draws, p, label)),
            Class::Hidden => {}
        }
    }
    let mut sections = Vec::new();
    let single = |title: &str, rows: Vec<SummaryRow>| SummarySection {
        title: title.to_string(),
        groups: vec![RowGroup {
            heading: None,
            rows,
        }],
    };
    if !smooth.is_empty() {
        sections.push(single("Smooth Terms", smooth));
    }
    if !groups.is_empty() {
        let groups = groups
            .into_iter()
            .map(|(label, rows)| {
                let n_sd = rows
                    .iter()
                    .filter(|r| r.param.starts_with("sd_"))
                    .count()
                    .max(1);
                let prefix = format!("r_{label}[");
                let n_effects = draws
                    .names
                    .iter()
                    .filter(|n| n.starts_with(&prefix))
                    .count();
                RowGroup {
                    heading: Some(format!("~{label} (Number of levels: {})", n_effects / n_sd)),
                    rows,
                }
            })
            .collect();
        sections.push(SummarySection {
            title: "Group-Level Effects".into(),
            groups,
        });
    }
    if !population.is_empty() {
        sections.push(single("Population-Level Effects", population));
    }
    if !family.is_empty() {
        sections.push(single("Family Specific Parameters", family));
    }
    SummaryTable {
        sections,
        chains: draws.n_chains(),
        total_draws: draws.n_draws(),
        divergences: draws.divergences(),
        treedepth_hits: 0,
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v.is_infinite() {
        if v > 0.0 { "Inf" } else { "-Inf" }.into()
    } else {
        let s = format!("{v:.2}");
        if s == "-0.00" {
            "0.00".into()
        } else {
            s
        }
    }
}

fn fmt_ess(v: f64) -> String {
    if v.is_finite() {
        format!("{:.0}", v)
    } else {
        "NA".into()
    }
}

const COLUMNS: [&str; 6] = [
    "Estimate",
    "Est.Error",
    "l-95% CI",
    "u-95% CI",
    "Eff.Sample",
    "Rhat",
];

fn render_rows(out: &mut String, rows: &[SummaryRow]) {
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                fmt_num(r.estimate),
                fmt_num(r.est_error),
                fmt_num(r.l95),
                fmt_num(r.u95),
                fmt_ess(r.ess),
                fmt_num(r.rhat),
            ]
        })
        .collect();
    let name_w = rows
        .iter()
        .map(|r| r.label.chars().count())
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = (0..6)
        .map(|j| {
            cells
                .iter()
                .map(|c| c[j].len())
                .chain([COLUMNS[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let _ = write!(out, "{:name_w$}", "");
    for (h, w) in COLUMNS.iter().zip(&widths) {
        let _ = write!(out, " {h:>w$}");
    }
    out.push('\n');
    for (r, c) in rows.iter().zip(&cells) {
        let _ = write!(out, "{:<name_w$}", r.label);
        for (v, w) in c.iter().zip(&widths) {
            let _ = write!(out, " {v:>w$}");
        }
        out.push('\n');
    }
}

impl SummaryTable {
    /// Looks a row up by draw-file name.
    pub fn get(&self, param: &str) -> Option<&SummaryRow> {
        self.rows().find(|r| r.param == param)
    }

    pub fn rows(&self) -> impl Iterator<Item = &SummaryRow> {
        self.sections
            .iter()
            .flat_map(|s| s.groups.iter().flat_map(|g| g.rows.iter()))
    }

    /// Largest finite R̂ of the listed rows; `∞` if any is infinite.
    pub fn max_rhat(&self) -> f64 {
        self.rows()
            .map(|r| r.rhat)
            .filter(|r| !r.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn render(&self, header: &FitHeader) -> String {
        let mut out = String::new();
        let _ = writeln!(out, " Family: {}", header.family);
        for (i, f) in header.formulas.iter().enumerate() {
            let _ = writeln!(out, "{}{f}", if i == 0 { "Formula: " } else { "         " });
        }
        let _ = writeln!(
            out,
            "   Data: {} (Number of observations: {})",
            header.data_name, header.n_obs
        );
        let _ = writeln!(
            out,
            "Samples: {} chains, each with iter = {}; warmup = {}; thin = {};",
            header.chains, header.iter, header.warmup, header.thin
        );
        let _ = writeln!(
            out,
            "         total post-warmup samples = {}",
            self.total_draws
        );
        out.push('\n');
        for s in &self.sections {
            let _ = writeln!(out, "{}:", s.title);
            for g in &s.groups {
                if let Some(h) = &g.heading {
                    let _ = writeln!(out, "{h}");
                }
                render_rows(&mut out, &g.rows);
                out.push('\n');
            }
        }
        out.push_str(
            "Samples were drawn using sampling(NUTS). For each parameter, Eff.Sample\n\
             is a crude measure of effective sample size, and Rhat is the potential\n\
             scale reduction factor on split chains (at convergence, Rhat = 1).\n",
        );
        if self.divergences > 0 {
            let _ = writeln!(
                out,
                "Warning: there were {} divergent transitions after warmup.",
                self.divergences
            );
        }
        if self.treedepth_hits > 0 {
            let _ = writeln!(
                out,
                "Warning: {} transitions hit the maximum tree depth.",
                self.treedepth_hits
            );
        }
        out
    }
}
