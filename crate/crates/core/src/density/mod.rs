//! Families, priors and the joint log-posterior over an unconstrained
//! parameter vector.
//!
//! Group effects are non-centered: `u = diag(sd) · L · z` with standard
//! normal `z`. Correlation factors are built row by row from unconstrained
//! values, see [`chol_from_raw`].

mod nl;
mod params;
mod posterior;
mod priors;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::modelspec::Link;

pub use nl::{eval_nl, NlTape};
pub use params::{
    chol_from_raw, n_cor_params, raw_from_chol, scale_and_correlate, ConstrainedView, ParamSpace,
    Segment, SegmentKind,
};
pub use posterior::{linear_predictors, DparValues, Posterior};
pub use priors::{
    default_intercept, default_scale, lkj_corr_lpdf, lkj_log_constant, lpdf, lpdf_positive,
    ResolvedPriors,
};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("row {row}: {message}")]
    Domain { row: usize, message: String },
    #[error("Poisson rate must be non-negative, got {0}")]
    Rate(f64),
    #[error("zero-inflation probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("parameter vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("identifier `{0}` is not bound")]
    Unbound(String),
    #[error("the design has no response")]
    NoResponse,
}

/// Applies the inverse link element-wise.
pub fn link_inverse(link: Link, eta: &[f64]) -> Vec<f64> {
    eta.iter().map(|&e| link.inverse(e)).collect()
}

pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log(1 / (1 + e^(-x)))` without overflow.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Zero-inflated Poisson log-probability:
/// `P(0) = zi + (1 - zi) e^(-λ)`, `P(y) = (1 - zi) Poisson(y | λ)` for `y > 0`.
pub fn zip_log_pmf(y: u64, lambda: f64, zi: f64) -> Result<f64, DensityError> {
    if !(lambda >= 0.0) {
        return Err(DensityError::Rate(lambda));
    }
    if !(0.0..=1.0).contains(&zi) {
        return Err(DensityError::Probability(zi));
    }
    let log_keep = (-zi).ln_1p();
    if y == 0 {
        return Ok(log_sum_exp(zi.ln(), log_keep - lambda));
    }
    let yf = y as f64;
    let log_pois = if lambda == 0.0 {
        f64::NEG_INFINITY
    } else {
        yf * lambda.ln() - lambda - ln_gamma(yf + 1.0)
    };
    Ok(log_keep + log_pois)
}

/// Poisson log-probability.
pub fn poisson_log_pmf(y: u64, lambda: f64) -> Result<f64, DensityError> {
    zip_log_pmf(y, lambda, 0.0)
}

#[cfg(test)]
mod tests;
