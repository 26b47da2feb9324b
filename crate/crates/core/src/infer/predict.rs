use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Draws, InferError};
use crate::density::{ConstrainedView, Posterior};
use crate::design::DesignSet;
use crate::modelspec::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictKind {
    /// Mean of the response distribution per draw.
    Expected,
    /// One simulated response per draw.
    Predictive,
}

/// Fills in group effects for levels absent from training with fresh
/// draws from the fitted group distribution, or zeroes every group effect
/// when groups are excluded.
fn complete_groups(
    design: &DesignSet,
    view: &mut ConstrainedView,
    include_groups: bool,
    rng: &mut ChaCha8Rng,
) {
    for (b, block) in design.random.iter().enumerate() {
        let known = view.u[b].nrows();
        let q = view.u[b].ncols();
        let total = block.n_levels().max(known);
        let mut u = DMatrix::zeros(total, q);
        if include_groups {
            u.rows_mut(0, known).copy_from(&view.u[b]);
            for g in known..total {
                let z: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
                for c in 0..q {
                    let lz: f64 = (0..=c).map(|k| view.chol[b][(c, k)] * z[k]).sum();
                    u[(g, c)] = view.sd[b][c] * lz;
                }
            }
        }
        view.u[b] = u;
    }
}

/// Draws × rows matrix of expected or simulated responses for `design`
/// (built with [`crate::design::assemble_new`] or the training design).
pub fn posterior_predict(
    posterior: &Posterior,
    draws: &Draws,
    design: &DesignSet,
    include_groups: bool,
    kind: PredictKind,
    seed: u64,
) -> Result<Vec<Vec<f64>>, InferError> {
    if draws.n_draws() == 0 {
        return Err(InferError::NoDraws);
    }
    let space = posterior.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(draws.n_draws());
    for row in draws.rows() {
        let mut view = space.view_from_draw(row)?;
        complete_groups(design, &mut view, include_groups, &mut rng);
        let dp = posterior.dpar_values(design, &view)?;
        let values = (0..design.n)
            .map(|i| {
                let mu = dp.mu[i];
                match (design.family, kind) {
                    (Family::Gaussian | Family::Poisson, PredictKind::Expected) => mu,
                    (Family::ZeroInflatedPoisson, PredictKind::Expected) => {
                        (1.0 - dp.zi.as_ref().expect("zi")[i]) * mu
                    }
                    (Family::Gaussian, PredictKind::Predictive) => {
                        let s = dp.sigma.as_ref().expect("sigma")[i];
                        Normal::new(mu, s).map_or(f64::NAN, |d| d.sample(&mut rng))
                    }
                    (Family::Poisson, PredictKind::Predictive) => poisson(mu, &mut rng),
                    (Family::ZeroInflatedPoisson, PredictKind::Predictive) => {
                        let zi = dp.zi.as_ref().expect("zi")[i];
                        if rng.random::<f64>() < zi {
                            0.0
                        } else {
                            poisson(mu, &mut rng)
                        }
                    }
                }
            })
            .collect();
        out.push(values);
    }
    Ok(out)
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).map_or(f64::NAN, |d| d.sample(rng))
}
