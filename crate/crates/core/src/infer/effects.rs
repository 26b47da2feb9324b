use std::collections::HashSet;

use serde::Serialize;

use super::diagnostics::{mean_sd, sorted_quantile};
use super::predict::{posterior_predict, PredictKind};
use super::{FittedModel, InferError};
use crate::design::assemble_new;
use crate::tabular::{Column, Dataset};

#[derive(Debug, Clone, PartialEq)]
pub struct EffectsOptions {
    pub focal: Vec<String>,
    /// One output block per row; columns override the reference values.
    pub conditions: Option<Dataset>,
    pub resolution: usize,
    pub include_groups: bool,
    pub kind: PredictKind,
    pub seed: u64,
}

impl EffectsOptions {
    pub fn new(focal: &str) -> Self {
        EffectsOptions {
            focal: vec![focal.to_string()],
            conditions: None,
            resolution: 100,
            include_groups: false,
            kind: PredictKind::Expected,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectsRow {
    pub condition: usize,
    /// Focal values as text (factor labels or numbers).
    pub focal: Vec<String>,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl EffectsRow {
    pub fn focal_value(&self, k: usize) -> Option<f64> {
        self.focal.get(k).and_then(|s| s.parse().ok())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Grid values of one focal variable as a column of `n` distinct cells.
fn focal_values(train: &Dataset, name: &str, resolution: usize) -> Result<Column, InferError> {
    let col = train
        .get(name)
        .ok_or_else(|| InferError::Effects(format!("focal variable `{name}` not found")))?;
    match col {
        Column::Factor { levels, .. } => {
            if levels.len() < 2 {
                return Err(InferError::Effects(format!(
                    "focal variable `{name}` is constant"
                )));
            }
            Ok(Column::Factor {
                codes: (0..levels.len()).collect(),
                levels: levels.clone(),
            })
        }
        _ => {
            let v = col.as_f64().expect("numeric column");
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(InferError::Effects(format!(
                    "focal variable `{name}` is constant"
                )));
            }
            Ok(Column::Numeric(linspace(lo, hi, resolution.max(2))))
        }
    }
}

fn repeat_cells(col: &Column, rows: &[usize]) -> Column {
    match col {
        Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
        Column::Integer(v) => Column::Integer(rows.iter().map(|&r| v[r]).collect()),
        Column::Factor { codes, levels } => Column::Factor {
            codes: rows.iter().map(|&r| codes[r]).collect(),
            levels: levels.clone(),
        },
    }
}

/// Expected (or predicted) response over a grid of the focal variables.
/// Other numeric variables sit at their means, factors at their reference
/// level, grouping variables at the first training row.
pub fn effects_grid(
    model: &FittedModel,
    train: &Dataset,
    opts: &EffectsOptions,
) -> Result<Vec<EffectsRow>, InferError> {
    if opts.focal.is_empty() {
        return Err(InferError::Effects("no focal variable".into()));
    }
    let grids = opts
        .focal
        .iter()
        .map(|f| focal_values(train, f, opts.resolution))
        .collect::<Result<Vec<_>, _>>()?;
    // Cartesian product, first focal variable varying slowest.
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for g in &grids {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                (0..g.len()).map(move |i| {
                    let mut c = c.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    let m = combos.len();
    let grouping: HashSet<&str> = model
        .checked
        .blocks()
        .iter()
        .flat_map(|b| b.grouping.variables())
        .collect();
    let n_conditions = opts.conditions.as_ref().map_or(1, |c| c.n_rows().max(1));
    let mut out = Vec::new();
    for cond in 0..n_conditions {
        let mut columns = Vec::new();
        for (name, col) in train.columns() {
            if let Some(k) = opts.focal.iter().position(|f| f == name) {
                let rows: Vec<usize> = combos.iter().map(|c| c[k]).collect();
                columns.push((name.to_string(), repeat_cells(&grids[k], &rows)));
                continue;
            }
            if let Some(c) = opts.conditions.as_ref().and_then(|c| c.get(name)) {
                columns.push((name.to_string(), repeat_cells(c, &vec![cond; m])));
                continue;
            }
            let fixed = match col {
                _ if grouping.contains(name) => repeat_cells(col, &vec![0; m]),
                Column::Factor { levels, .. } => Column::Factor {
                    codes: vec![0; m],
                    levels: levels.clone(),
                },
                _ => {
                    let (mean, _) = mean_sd(&col.as_f64().expect("numeric column"));
                    Column::Numeric(vec![mean; m])
                }
            };
            columns.push((name.to_string(), fixed));
        }
        let grid = Dataset::new(columns)?;
        let design = assemble_new(&model.checked, model.posterior.design(), &grid)?;
        let pred = posterior_predict(
            &model.posterior,
            &model.draws,
            &design,
            opts.include_groups,
            opts.kind,
            opts.seed.wrapping_add(cond as u64),
        )?;
        for (i, combo) in combos.iter().enumerate() {
            let focal = combo.iter().zip(&grids).map(|(&j, g)| g.label(j)).collect();
            let (estimate, lower, upper) = interval(pred.iter().map(|row| row[i]).collect());
            out.push(EffectsRow {
                condition: cond + 1,
                focal,
                estimate,
                lower,
                upper,
            });
        }
    }
    Ok(out)
}

fn interval(mut v: Vec<f64>) -> (f64, f64, f64) {
    let (mean, _) = mean_sd(&v);
    v.sort_by(f64::total_cmp);
    (mean, sorted_quantile(&v, 0.025), sorted_quantile(&v, 0.975))
}

/// The contribution `Xs·βs + Zs·s` of one smooth over its covariate range,
/// centered to mean zero per draw. `term` is the covariate or term label.
pub fn smooth_grid(
    model: &FittedModel,
    term: &str,
    resolution: usize,
) -> Result<Vec<EffectsRow>, InferError> {
    let design = model.posterior.design();
    let (p, s) = design
        .predictors
        .iter()
        .enumerate()
        .find_map(|(p, pred)| {
            pred.smooths
                .iter()
                .position(|sm| sm.covariate == term || sm.label == term)
                .map(|s| (p, s))
        })
        .ok_or_else(|| InferError::Effects(format!("no smooth term for `{term}`")))?;
    let sm = &design.predictors[p].smooths[s];
    let nf = design.predictors[p].fixed.x.ncols();
    let lo = *sm.knots.first().expect("knots");
    let hi = *sm.knots.last().expect("knots");
    let x = linspace(lo, hi, resolution.max(2));
    let (xs, zs) = sm.evaluate(&x);
    let space = model.posterior.space();
    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(model.draws.n_draws());
    for row in model.draws.rows() {
        let view = space.view_from_draw(row)?;
        let bs = view.beta[p][nf + s];
        let coefs = &view.smooth_coefs[p][s];
        let mut f: Vec<f64> = (0..x.len())
            .map(|i| xs[(i, 0)] * bs + (0..coefs.len()).map(|k| zs[(i, k)] * coefs[k]).sum::<f64>())
            .collect();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        f.iter_mut().for_each(|v| *v -= mean);
        curves.push(f);
    }
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| {
            let (estimate, lower, upper) = interval(curves.iter().map(|c| c[i]).collect());
            EffectsRow {
                condition: 1,
                focal: vec![xi.to_string()],
                estimate,
                lower,
                upper,
            }
        })
        .collect())
}
