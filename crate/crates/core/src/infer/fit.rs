use super::summary::{summarize, SummaryTable};
use super::{nuts, Draws, InferError, SamplerConfig};
use crate::density::Posterior;
use crate::design::{assemble, DesignSet};
use crate::modelspec::{validate, CheckedSpec, ModelSpec};
use crate::tabular::Dataset;

/// A checked model, its posterior and the draws sampled from it.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub checked: CheckedSpec,
    pub posterior: Posterior,
    pub draws: Draws,
    pub config: SamplerConfig,
}

impl FittedModel {
    pub fn summary(&self) -> SummaryTable {
        let mut table = summarize(&self.draws);
        table.treedepth_hits = self.draws.treedepth_hits(self.config.max_treedepth);
        table
    }

    /// Pointwise log-likelihood of the training data.
    pub fn loglik(&self) -> Result<Vec<Vec<f64>>, InferError> {
        pointwise_loglik(&self.posterior, &self.draws, self.posterior.design())
    }
}

/// Validates, compiles and samples a model.
pub fn fit_model(
    spec: &ModelSpec,
    data: &Dataset,
    config: &SamplerConfig,
) -> Result<FittedModel, InferError> {
    config.validate()?;
    let checked = validate(spec, data)?;
    let design = assemble(&checked, data)?;
    let posterior = Posterior::new(design, &spec.priors)?;
    let draws = nuts::sample(&posterior, config)?;
    Ok(FittedModel {
        checked,
        posterior,
        draws,
        config: config.clone(),
    })
}

/// Draws × observations matrix of weighted log-likelihood contributions.
pub fn pointwise_loglik(
    posterior: &Posterior,
    draws: &Draws,
    design: &DesignSet,
) -> Result<Vec<Vec<f64>>, InferError> {
    let space = posterior.space();
    draws
        .rows()
        .map(|row| {
            let view = space.view_from_draw(row)?;
            Ok(posterior.pointwise_loglik(design, &view)?)
        })
        .collect()
}
