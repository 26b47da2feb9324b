//! WAIC and Pareto-smoothed importance-sampling LOO from pointwise
//! log-likelihood matrices (draws × observations).

use serde::Serialize;

use super::diagnostics::mean_sd;
use super::InferError;

/// Pareto shape above which an observation's LOO estimate is unreliable.
pub const K_THRESHOLD: f64 = 0.7;
/// Fraction of the largest importance ratios replaced by smoothed values.
const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IcMethod {
    Loo,
    Waic,
}

impl IcMethod {
    pub fn label(self) -> &'static str {
        match self {
            IcMethod::Loo => "LOOIC",
            IcMethod::Waic => "WAIC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcEstimate {
    pub method: IcMethod,
    /// On the deviance scale (`-2 · elpd`).
    pub value: f64,
    pub se: f64,
    /// Effective number of parameters.
    pub p_eff: f64,
    /// Pointwise contributions on the deviance scale.
    pub pointwise: Vec<f64>,
    /// Pareto shape per observation (LOO only).
    pub pareto_k: Vec<f64>,
}

impl IcEstimate {
    /// Observations whose Pareto shape exceeds the reliability threshold.
    pub fn flagged(&self) -> Vec<usize> {
        self.pareto_k
            .iter()
            .enumerate()
            .filter(|(_, k)| **k > K_THRESHOLD)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcDifference {
    pub a: usize,
    pub b: usize,
    /// `IC(a) - IC(b)`.
    pub diff: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcComparison {
    pub names: Vec<String>,
    pub estimates: Vec<IcEstimate>,
    pub differences: Vec<IcDifference>,
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / v.len() as f64).ln()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn column(ll: &[Vec<f64>], i: usize) -> Vec<f64> {
    ll.iter().map(|row| row[i]).collect()
}

fn check(ll: &[Vec<f64>]) -> Result<usize, InferError> {
    let n = ll.first().map_or(0, |r| r.len());
    if ll.is_empty() || n == 0 {
        return Err(InferError::NoDraws);
    }
    if let Some(r) = ll.iter().find(|r| r.len() != n) {
        return Err(InferError::Mismatch(n, r.len()));
    }
    Ok(n)
}

fn se_of(pointwise: &[f64]) -> f64 {
    let (_, sd) = mean_sd(pointwise);
    (pointwise.len() as f64).sqrt() * sd
}

pub fn waic(ll: &[Vec<f64>]) -> Result<IcEstimate, InferError> {
    let n = check(ll)?;
    let mut pointwise = Vec::with_capacity(n);
    let mut p_eff = 0.0;
    for i in 0..n {
        let c = column(ll, i);
        let lpd = log_mean_exp(&c);
        let (_, sd) = mean_sd(&c);
        p_eff += sd * sd;
        pointwise.push(-2.0 * (lpd - sd * sd));
    }
    Ok(IcEstimate {
        method: IcMethod::Waic,
        value: pointwise.iter().sum(),
        se: se_of(&pointwise),
        p_eff,
        pointwise,
        pareto_k: Vec::new(),
    })
}

/// Generalized Pareto fit (shape `k`, scale `sigma`) to positive
/// exceedances sorted ascending, by the profile empirical-Bayes method of
/// Zhang and Stephens with a weak prior pulling `k` towards 0.5.
pub(crate) fn gpd_fit(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let nf = n as f64;
    let m = 30 + (nf.sqrt() as usize);
    let prior = 3.0;
    let x_star = x[((nf / 4.0 + 0.5).floor() as usize)
        .saturating_sub(1)
        .min(n - 1)];
    let theta: Vec<f64> = (1..=m)
        .map(|j| 1.0 / x[n - 1] + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / prior / x_star)
        .collect();
    let l_theta: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let b = -t;
            let k = x.iter().map(|v| (b * v).ln_1p()).sum::<f64>() / nf;
            nf * ((b / k).ln() - k - 1.0)
        })
        .collect();
    let norm = log_sum_exp(&l_theta);
    let theta_hat: f64 = theta
        .iter()
        .zip(&l_theta)
        .map(|(t, l)| t * (l - norm).exp())
        .sum();
    let k = x.iter().map(|v| (-theta_hat * v).ln_1p()).sum::<f64>() / nf;
    let sigma = -k / theta_hat;
    let k = (k * nf + 0.5 * 10.0) / (nf + 10.0);
    (k, sigma)
}

fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k == 0.0 {
        -sigma * (-p).ln_1p()
    } else {
        sigma * (-k * (-p).ln_1p()).exp_m1() / k
    }
}

/// Pareto-smoothed log importance weights (normalized) for one observation,
/// given raw log ratios; also returns the fitted shape.
pub fn psis(log_ratios: &[f64]) -> (Vec<f64>, f64) {
    let s = log_ratios.len();
    let max = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = log_ratios.iter().map(|r| r - max).collect();
    let tail_len = (TAIL_FRACTION * s as f64).ceil() as usize;
    let mut k = f64::INFINITY;
    if tail_len >= 5 && tail_len < s {
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
        let tail = &order[s - tail_len..];
        let cutoff = lw[order[s - tail_len - 1]];
        let exp_cut = cutoff.exp();
        let exceed: Vec<f64> = tail.iter().map(|&i| lw[i].exp() - exp_cut).collect();
        let distinct = exceed.windows(2).any(|w| w[1] > w[0]);
        if distinct && exceed[0] >= 0.0 {
            let (kh, sigma) = gpd_fit(&exceed);
            k = kh;
            if kh.is_finite() {
                for (j, &i) in tail.iter().enumerate() {
                    let p = (j as f64 + 0.5) / tail_len as f64;
                    let smoothed = (gpd_quantile(p, kh, sigma) + exp_cut).ln();
                    lw[i] = smoothed.min(0.0);
                }
            }
        }
    }
    let norm = log_sum_exp(&lw);
    lw.iter_mut().for_each(|v| *v -= norm);
    (lw, k)
}

pub fn loo(ll: &[Vec<f64>]) -> Result<IcEstimate, InferError> {
    let n = check(ll)?;
    let mut pointwise = Vec::with_capacity(n);
    let mut pareto_k = Vec::with_capacity(n);
    let mut lpd = 0.0;
    for i in 0..n {
        let c = column(ll, i);
        let ratios: Vec<f64> = c.iter().map(|v| -v).collect();
        let (lw, k) = psis(&ratios);
        let terms: Vec<f64> = lw.iter().zip(&c).map(|(w, l)| w + l).collect();
        let elpd = log_sum_exp(&terms);
        lpd += log_mean_exp(&c);
        pointwise.push(-2.0 * elpd);
        pareto_k.push(k);
    }
    let value: f64 = pointwise.iter().sum();
    Ok(IcEstimate {
        method: IcMethod::Loo,
        value,
        se: se_of(&pointwise),
        p_eff: lpd + value / 2.0,
        pointwise,
        pareto_k,
    })
}

/// Information criteria per model plus every pairwise difference.
pub fn ic_compare(
    models: &[(String, Vec<Vec<f64>>)],
    method: IcMethod,
) -> Result<IcComparison, InferError> {
    let mut estimates = Vec::new();
    for (_, ll) in models {
        estimates.push(match method {
            IcMethod::Loo => loo(ll)?,
            IcMethod::Waic => waic(ll)?,
        });
    }
    if let Some(first) = estimates.first() {
        let n = first.pointwise.len();
        if let Some(other) = estimates.iter().find(|e| e.pointwise.len() != n) {
            return Err(InferError::Mismatch(n, other.pointwise.len()));
        }
    }
    let mut differences = Vec::new();
    for a in 0..estimates.len() {
        for b in a + 1..estimates.len() {
            let d: Vec<f64> = estimates[a]
                .pointwise
                .iter()
                .zip(&estimates[b].pointwise)
                .map(|(x, y)| x - y)
                .collect();
            differences.push(IcDifference {
                a,
                b,
                diff: estimates[a].value - estimates[b].value,
                se: se_of(&d),
            });
        }
    }
    Ok(IcComparison {
        names: models.iter().map(|(n, _)| n.clone()).collect(),
        estimates,
        differences,
    })
}

impl IcComparison {
    /// Table with one row per model and one per pairwise difference.
    pub fn render(&self) -> String {
        let label = self.estimates.first().map_or("LOOIC", |e| e.method.label());
        let mut rows: Vec<(String, f64, f64)> = self
            .names
            .iter()
            .zip(&self.estimates)
            .map(|(n, e)| (n.clone(), e.value, e.se))
            .collect();
        rows.extend(self.differences.iter().map(|d| {
            (
                format!("{} - {}", self.names[d.a], self.names[d.b]),
                d.diff,
                d.se,
            )
        }));
        let name_w = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
        let vals: Vec<(String, String)> = rows
            .iter()
            .map(|r| (format!("{:.2}", r.1), format!("{:.2}", r.2)))
            .collect();
        let w1 = vals
            .iter()
            .map(|v| v.0.len())
            .chain([label.len()])
            .max()
            .unwrap_or(0);
        let w2 = vals.iter().map(|v| v.1.len()).chain([2]).max().unwrap_or(0);
        let mut out = format!("{:name_w$} {label:>w1$} {:>w2$}\n", "", "SE");
        for (r, v) in rows.iter().zip(&vals) {
            out.push_str(&format!("{:<name_w$} {:>w1$} {:>w2$}\n", r.0, v.0, v.1));
        }
        for (name, e) in self.names.iter().zip(&self.estimates) {
            let flagged = e.flagged();
            if !flagged.is_empty() {
                out.push_str(&format!(
                    "Warning: {name} has {} observation(s) with Pareto k > {K_THRESHOLD}.\n",
                    flagged.len()
                ));
            }
        }
        out
    }
}
