use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Column, DataError, Dataset};

/// Generating values for the multi-membership simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub intercept: f64,
    pub sd_school: f64,
    pub sigma: f64,
}

impl Default for SimTruth {
    fn default() -> Self {
        SimTruth {
            intercept: 20.0,
            sd_school: 3.0,
            sigma: 3.5,
        }
    }
}

/// Simulated data together with the latent school effects used to build `y`.
#[derive(Debug, Clone)]
pub struct SimulatedMultiMembership {
    pub data: Dataset,
    /// School effect per school, indexed by school id - 1.
    pub school_effects: Vec<f64>,
    pub n_changers: usize,
}

/// Students attending one or two of `nschools` schools. The first
/// `floor(change * nstudents)` rows change school (two distinct schools),
/// the rest repeat the same school in `s1` and `s2`. All weights are 0.5.
pub fn sim_multi_mem(
    nschools: usize,
    nstudents: usize,
    change: f64,
    truth: SimTruth,
    seed: u64,
) -> Result<Dataset, DataError> {
    sim_multi_mem_with_latent(nschools, nstudents, change, truth, seed).map(|s| s.data)
}

pub fn sim_multi_mem_with_latent(
    nschools: usize,
    nstudents: usize,
    change: f64,
    truth: SimTruth,
    seed: u64,
) -> Result<SimulatedMultiMembership, DataError> {
    if nschools < 2 {
        return Err(DataError::InvalidArgument(
            "nschools must be at least 2".into(),
        ));
    }
    if nstudents < 1 {
        return Err(DataError::InvalidArgument(
            "nstudents must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&change) {
        return Err(DataError::InvalidArgument(format!(
            "change must lie in [0, 1], got {change}"
        )));
    }
    if !(truth.sd_school >= 0.0 && truth.sigma >= 0.0) {
        return Err(DataError::InvalidArgument(
            "sd_school and sigma must be >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let school_effects: Vec<f64> = (0..nschools)
        .map(|_| truth.sd_school * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let n_changers = (change * nstudents as f64).floor() as usize;
    let mut s1 = Vec::with_capacity(nstudents);
    let mut s2 = Vec::with_capacity(nstudents);
    for i in 0..nstudents {
        if i < n_changers {
            let pair = sample(&mut rng, nschools, 2);
            s1.push(pair.index(0));
            s2.push(pair.index(1));
        } else {
            let s = rng.random_range(0..nschools);
            s1.push(s);
            s2.push(s);
        }
    }
    let w = vec![0.5; nstudents];
    let y: Vec<f64> = (0..nstudents)
        .map(|i| {
            truth.intercept
                + w[i] * school_effects[s1[i]]
                + w[i] * school_effects[s2[i]]
                + truth.sigma * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    let levels: Vec<String> = (1..=nschools).map(|s| s.to_string()).collect();
    let data = Dataset::new(vec![
        (
            "s1".into(),
            Column::Factor {
                codes: s1,
                levels: levels.clone(),
            },
        ),
        ("s2".into(), Column::Factor { codes: s2, levels }),
        ("w1".into(), Column::Numeric(w.clone())),
        ("w2".into(), Column::Numeric(w)),
        ("y".into(), Column::Numeric(y)),
    ])?;
    Ok(SimulatedMultiMembership {
        data,
        school_effects,
        n_changers,
    })
}
