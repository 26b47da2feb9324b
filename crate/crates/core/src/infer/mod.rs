//! Posterior maximization and sampling, convergence diagnostics, summaries,
//! information criteria and predictions.

mod diagnostics;
mod draws;
mod effects;
mod fit;
mod ic;
mod map;
mod nuts;
mod predict;
mod summary;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DensityError, Posterior};
use crate::design::DesignError;
use crate::modelspec::SpecError;
use crate::tabular::DataError;

pub use diagnostics::{ess, mean_sd, quantile, split_rhat};
pub use draws::{ChainDraws, Draws};
pub use effects::{effects_grid, smooth_grid, EffectsOptions, EffectsRow};
pub use fit::{fit_model, pointwise_loglik, FittedModel};
pub use ic::{ic_compare, loo, psis, waic, IcComparison, IcDifference, IcEstimate, IcMethod};
pub use map::{map_estimate, MapOptions, MapResult};
pub use nuts::{sample as nuts_sample, sample_target};
pub use predict::{posterior_predict, PredictKind};
pub use summary::{summarize, FitHeader, SummaryRow, SummarySection, SummaryTable};

/// A differentiable log density over an unconstrained vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad`; non-finite values signal rejection.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        Posterior::dim(self)
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        Posterior::log_density_grad(self, x, grad)
    }
}

#[derive(Debug, Error)]
pub enum InferError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("chain {chain}: no finite initial value after {tries} attempts")]
    Init { chain: usize, tries: usize },
    #[error("chain {chain}: step size adaptation failed ({reason})")]
    StepSize { chain: usize, reason: String },
    #[error("no draws kept")]
    NoDraws,
    #[error("the starting point has a non-finite log density or gradient")]
    NonFiniteStart,
    #[error("models have different numbers of observations ({0} and {1})")]
    Mismatch(usize, usize),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("effects grid: {0}")]
    Effects(String),
    #[error("draw file: {0}")]
    DrawFile(String),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Iterations per chain including warmup.
    pub iter: usize,
    pub warmup: usize,
    pub adapt_delta: f64,
    pub max_treedepth: usize,
    pub seed: u64,
    pub thin: usize,
    /// Worker threads; chains beyond this run in turn.
    pub cores: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            iter: 2000,
            warmup: 1000,
            adapt_delta: 0.8,
            max_treedepth: 10,
            seed: 1,
            thin: 1,
            cores: 4,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), InferError> {
        let fail = |m: &str| Err(InferError::Config(m.to_string()));
        if self.chains == 0 {
            return fail("at least one chain is required");
        }
        if self.warmup >= self.iter {
            return fail("warmup must be smaller than iter");
        }
        if !(self.adapt_delta > 0.0 && self.adapt_delta < 1.0) {
            return fail("adapt_delta must lie strictly between 0 and 1");
        }
        if self.thin == 0 {
            return fail("thin must be positive");
        }
        if self.max_treedepth == 0 {
            return fail("max_treedepth must be positive");
        }
        if (self.iter - self.warmup) / self.thin == 0 {
            return Err(InferError::NoDraws);
        }
        Ok(())
    }

    /// Draws kept per chain.
    pub fn kept(&self) -> usize {
        (self.iter - self.warmup) / self.thin
    }
}
