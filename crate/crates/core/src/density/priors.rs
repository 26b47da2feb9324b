use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use super::params::ParamSpace;
use super::LN_2PI;
use crate::design::DesignSet;
use crate::modelspec::{coef_prefix, PriorDensity, PriorSpec, PriorTarget, Role};

pub fn default_intercept() -> PriorDensity {
    PriorDensity::StudentT {
        df: 3.0,
        mu: 0.0,
        sd: 10.0,
    }
}

pub fn default_scale() -> PriorDensity {
    PriorDensity::HalfStudentT { df: 3.0, sd: 10.0 }
}

fn student_t_lpdf(x: f64, df: f64, mu: f64, sd: f64) -> (f64, f64) {
    let z = (x - mu) / sd;
    let c = ln_gamma((df + 1.0) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - sd.ln();
    let v = c - (df + 1.0) / 2.0 * (z * z / df).ln_1p();
    let d = -(df + 1.0) * z / (sd * (df + z * z));
    (v, d)
}

/// Log density and its derivative at `x`.
pub fn lpdf(density: &PriorDensity, x: f64) -> (f64, f64) {
    match *density {
        PriorDensity::Normal { mu, sd } => {
            let z = (x - mu) / sd;
            (-0.5 * LN_2PI - sd.ln() - 0.5 * z * z, -z / sd)
        }
        PriorDensity::StudentT { df, mu, sd } => student_t_lpdf(x, df, mu, sd),
        PriorDensity::HalfStudentT { df, sd } => {
            let (v, d) = student_t_lpdf(x, df, 0.0, sd);
            (v + std::f64::consts::LN_2, d)
        }
        PriorDensity::Lkj { .. } => (0.0, 0.0),
    }
}

/// Log density of a positive parameter: the density truncated to `(0, ∞)`.
pub fn lpdf_positive(density: &PriorDensity, x: f64) -> (f64, f64) {
    let (v, d) = lpdf(density, x);
    let mass = match *density {
        PriorDensity::Normal { mu, sd } => Normal::new(mu, sd).map(|n| n.sf(0.0)).unwrap_or(1.0),
        PriorDensity::StudentT { df, mu, sd } => {
            StudentsT::new(mu, sd, df).map(|t| t.sf(0.0)).unwrap_or(1.0)
        }
        PriorDensity::HalfStudentT { .. } | PriorDensity::Lkj { .. } => 1.0,
    };
    (v - mass.ln(), d)
}

/// Log normalizing constant of the LKJ density on `k × k` correlation matrices.
pub fn lkj_log_constant(k: usize, eta: f64) -> f64 {
    let mut log_integral = 0.0;
    for i in 1..k {
        let m = (k - i) as f64;
        log_integral += (2.0 * eta - 2.0 + m) * m * std::f64::consts::LN_2;
        let a = eta + (m - 1.0) / 2.0;
        log_integral += m * ln_beta(a, a);
    }
    -log_integral
}

/// LKJ log density of a correlation matrix given its Cholesky factor,
/// with respect to the off-diagonal correlations.
pub fn lkj_corr_lpdf(l: &nalgebra::DMatrix<f64>, eta: f64) -> f64 {
    let k = l.nrows();
    let log_det: f64 = (0..k).map(|i| 2.0 * l[(i, i)].ln()).sum();
    lkj_log_constant(k, eta) + (eta - 1.0) * log_det
}

/// Priors matched to every parameter of a model; `None` is flat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedPriors {
    pub beta: Vec<Vec<Option<PriorDensity>>>,
    /// Per smooth, in parameter-space order.
    pub smooth_sds: Vec<PriorDensity>,
    pub sd: Vec<Vec<PriorDensity>>,
    /// LKJ shape per block; unused for uncorrelated blocks.
    pub cor_eta: Vec<f64>,
    pub sigma: Option<PriorDensity>,
}

fn pick(priors: &[PriorSpec], matches: impl Fn(&PriorTarget) -> bool) -> Option<&PriorSpec> {
    priors
        .iter()
        .filter(|p| matches(&p.target))
        .max_by_key(|p| p.specificity())
}

impl ResolvedPriors {
    pub fn resolve(priors: &[PriorSpec], design: &DesignSet, space: &ParamSpace) -> ResolvedPriors {
        let mut beta = Vec::new();
        for pred in &design.predictors {
            let owner = pred.owner.as_str();
            let names: Vec<String> = pred
                .fixed
                .column_names()
                .iter()
                .cloned()
                .chain(pred.smooths.iter().map(|s| format!("{}_1", s.label)))
                .collect();
            let mut out = Vec::new();
            for name in &names {
                let is_intercept = name == "Intercept";
                let chosen = pick(priors, |t| match t {
                    PriorTarget::Coefficient {
                        owner: o,
                        name: Some(n),
                    } => o == owner && n == name,
                    PriorTarget::Intercept { owner: o } => is_intercept && o == owner,
                    PriorTarget::Coefficient {
                        owner: o,
                        name: None,
                    } => o == owner && (!is_intercept || pred.role == Role::Nlpar),
                    _ => false,
                });
                out.push(match chosen {
                    Some(p) => Some(p.density),
                    None if is_intercept && pred.role == Role::Dpar => Some(default_intercept()),
                    None => None,
                });
            }
            beta.push(out);
        }
        let smooth_sds = space
            .smooths
            .iter()
            .map(|s| {
                let label = &design.predictors[s.predictor].smooths[s.smooth].label;
                pick(priors, |t| match t {
                    PriorTarget::Sds { smooth: None } => true,
                    PriorTarget::Sds { smooth: Some(x) } => x == &s.id || x == label,
                    _ => false,
                })
                .map_or_else(default_scale, |p| p.density)
            })
            .collect();
        let mut sd = Vec::new();
        let mut cor_eta = Vec::new();
        for block in &design.random {
            let label = block.label();
            let per_coef = block
                .coef_names
                .iter()
                .zip(&block.coef_owners)
                .map(|(name, owner)| {
                    let bare = name.strip_prefix(&coef_prefix(owner)).unwrap_or(name);
                    pick(priors, |t| match t {
                        PriorTarget::Sd { group, coef } => {
                            group.as_ref().is_none_or(|g| *g == label)
                                && coef.as_ref().is_none_or(|c| c == name || c == bare)
                        }
                        _ => false,
                    })
                    .map_or_else(default_scale, |p| p.density)
                })
                .collect();
            sd.push(per_coef);
            let eta = pick(priors, |t| match t {
                PriorTarget::Cor { group } => group.as_ref().is_none_or(|g| *g == label),
                _ => false,
            })
            .map_or(1.0, |p| match p.density {
                PriorDensity::Lkj { eta } => eta,
                _ => 1.0,
            });
            cor_eta.push(eta);
        }
        let sigma = design.constant_dpars.iter().any(|d| d == "sigma").then(|| {
            pick(priors, |t| matches!(t, PriorTarget::Sigma))
                .map_or_else(default_scale, |p| p.density)
        });
        ResolvedPriors {
            beta,
            smooth_sds,
            sd,
            cor_eta,
            sigma,
        }
    }

    /// One line per parameter: name and prior, for inspection and codegen.
    pub fn table(&self, space: &ParamSpace) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (p, names) in space.beta_names.iter().enumerate() {
            for (n, d) in names.iter().zip(&self.beta[p]) {
                out.push((
                    n.clone(),
                    d.map_or_else(|| "flat".to_string(), |d| d.to_string()),
                ));
            }
        }
        for (s, d) in space.smooths.iter().zip(&self.smooth_sds) {
            out.push((format!("sds_{}", s.id), d.to_string()));
        }
        for (b, shape) in space.blocks.iter().enumerate() {
            for (c, d) in shape.coef_names.iter().zip(&self.sd[b]) {
                out.push((format!("sd_{}__{c}", shape.label), d.to_string()));
            }
            if shape.correlated {
                out.push((
                    format!("cor_{}", shape.label),
                    format!("lkj({})", self.cor_eta[b]),
                ));
            }
        }
        if let Some(d) = &self.sigma {
            out.push(("sigma".into(), d.to_string()));
        }
        out
    }
}
