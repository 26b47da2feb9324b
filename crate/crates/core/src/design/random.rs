use std::collections::BTreeSet;

use nalgebra::DMatrix;

use super::fixed::FixedEncoding;
use super::DesignError;
use crate::formula::FixedTerm;
use crate::modelspec::{coef_prefix, CoefTerm, GroupBlockSpec, Grouping};
use crate::tabular::{Column, Dataset};

/// Group-level design of one correlation block.
///
/// Row `i` adds `Σ_(g, w) w · Σ_c x[c][i] · u[g, c]` to the predictor owning
/// coefficient `c`, where `(g, w)` runs over `members[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomBlock {
    pub spec: GroupBlockSpec,
    /// Level labels; the first `n_known_levels` come from the training data.
    pub levels: Vec<String>,
    pub n_known_levels: usize,
    /// Coefficient names, e.g. `Intercept`, `sigma_Intercept`.
    pub coef_names: Vec<String>,
    /// Owner (dpar/nlpar) of each coefficient.
    pub coef_owners: Vec<String>,
    /// Covariate value of each coefficient per row, `q × n`.
    pub x: Vec<Vec<f64>>,
    /// Per row: levels touched and their weights.
    pub members: Vec<Vec<(usize, f64)>>,
    pub(crate) encodings: Vec<(String, FixedEncoding)>,
    pub warnings: Vec<String>,
}

impl RandomBlock {
    pub fn q(&self) -> usize {
        self.coef_names.len()
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn n_rows(&self) -> usize {
        self.members.len()
    }

    pub fn label(&self) -> String {
        self.spec.grouping.label()
    }

    /// Sparse entries of row `i`: `(level, coefficient, value)`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.members[i].iter().flat_map(move |&(g, w)| {
            (0..self.q()).filter_map(move |c| {
                let v = w * self.x[c][i];
                (v != 0.0).then_some((g, c, v))
            })
        })
    }

    /// Dense `n × (G·q)` matrix; column `g·q + c` belongs to level `g`, coefficient `c`.
    pub fn dense_z(&self) -> DMatrix<f64> {
        let q = self.q();
        let mut z = DMatrix::zeros(self.n_rows(), self.n_levels() * q);
        for i in 0..self.n_rows() {
            for (g, c, v) in self.row_entries(i) {
                z[(i, g * q + c)] += v;
            }
        }
        z
    }
}

/// Row labels of a factor grouping; combinations are joined with `_`.
fn grouping_labels(vars: &[String], d: &Dataset) -> Result<Vec<String>, DesignError> {
    let mut out: Vec<String> = vec![String::new(); d.n_rows()];
    for (k, v) in vars.iter().enumerate() {
        let col = d
            .get(v)
            .ok_or_else(|| DesignError::MissingColumn(v.clone()))?;
        let labels = col
            .grouping_labels()
            .ok_or_else(|| DesignError::KindChanged(v.clone()))?;
        for (o, l) in out.iter_mut().zip(labels) {
            if k > 0 {
                o.push('_');
            }
            o.push_str(&l);
        }
    }
    Ok(out)
}

/// Sorted level list, or the training levels followed by unseen ones.
fn level_list<'a>(
    observed: impl Iterator<Item = &'a String>,
    known: Option<&[String]>,
) -> Vec<String> {
    let set: BTreeSet<&String> = observed.collect();
    match known {
        None => set.into_iter().cloned().collect(),
        Some(k) => {
            let mut out = k.to_vec();
            out.extend(set.into_iter().filter(|l| !k.contains(l)).cloned());
            out
        }
    }
}

fn index_of(levels: &[String], label: &str) -> usize {
    levels
        .iter()
        .position(|l| l == label)
        .expect("level list covers all labels")
}

/// Builds the coefficient columns of a block, one encoding per owner run.
fn coefficient_columns(
    spec: &GroupBlockSpec,
    d: &Dataset,
    encodings: Option<&[(String, FixedEncoding)]>,
) -> Result<
    (
        Vec<String>,
        Vec<String>,
        Vec<Vec<f64>>,
        Vec<(String, FixedEncoding)>,
    ),
    DesignError,
> {
    let mut runs: Vec<(String, bool, Vec<FixedTerm>)> = Vec::new();
    for c in &spec.coefficients {
        if runs.last().is_none_or(|r| r.0 != c.owner) {
            runs.push((c.owner.clone(), false, Vec::new()));
        }
        let run = runs.last_mut().expect("just pushed");
        match &c.term {
            CoefTerm::Intercept => run.1 = true,
            CoefTerm::Term(t) => run.2.push(t.clone()),
        }
    }
    let mut names = Vec::new();
    let mut owners = Vec::new();
    let mut x = Vec::new();
    let mut used = Vec::new();
    for (k, (owner, intercept, terms)) in runs.into_iter().enumerate() {
        let enc = match encodings {
            Some(e) => e[k].1.clone(),
            None => FixedEncoding::new(intercept, &terms, d)?,
        };
        let m = enc.encode(d)?;
        for (j, n) in enc.names.iter().enumerate() {
            names.push(format!("{}{n}", coef_prefix(&owner)));
            owners.push(owner.clone());
            x.push(m.column(j).iter().copied().collect());
        }
        used.push((owner, enc));
    }
    Ok((names, owners, x, used))
}

/// Group-level block for a single factor or a factor combination.
pub fn build_random(spec: &GroupBlockSpec, d: &Dataset) -> Result<RandomBlock, DesignError> {
    build_random_with(spec, d, None, None)
}

pub(crate) fn build_random_with(
    spec: &GroupBlockSpec,
    d: &Dataset,
    known_levels: Option<&[String]>,
    encodings: Option<&[(String, FixedEncoding)]>,
) -> Result<RandomBlock, DesignError> {
    let (coef_names, coef_owners, x, encodings) = coefficient_columns(spec, d, encodings)?;
    let mut warnings = Vec::new();
    let (levels, members) = match &spec.grouping {
        Grouping::Factor { vars } => {
            let labels = grouping_labels(vars, d)?;
            let levels = level_list(labels.iter(), known_levels);
            let members = labels
                .iter()
                .map(|l| vec![(index_of(&levels, l), 1.0)])
                .collect();
            (levels, members)
        }
        Grouping::Mm { members, weights } => {
            mm_members(members, weights.as_deref(), d, known_levels, &mut warnings)?
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(RandomBlock {
        spec: spec.clone(),
        n_known_levels: known_levels.map_or(levels.len(), <[String]>::len),
        levels,
        coef_names,
        coef_owners,
        x,
        members,
        encodings,
        warnings,
    })
}

/// Multi-membership rows: level union across members, default weights `1/k`,
/// repeated levels within a row summed.
pub(crate) fn mm_members(
    members: &[String],
    weights: Option<&[String]>,
    d: &Dataset,
    known_levels: Option<&[String]>,
    warnings: &mut Vec<String>,
) -> Result<(Vec<String>, Vec<Vec<(usize, f64)>>), DesignError> {
    let k = members.len();
    if let Some(w) = weights {
        if w.len() != k {
            return Err(DesignError::WeightArity {
                members: k,
                weights: w.len(),
            });
        }
    }
    let labels = members
        .iter()
        .map(|m| grouping_labels(std::slice::from_ref(m), d))
        .collect::<Result<Vec<_>, _>>()?;
    let weight_cols: Vec<Vec<f64>> = match weights {
        Some(ws) => ws
            .iter()
            .map(|w| {
                let col = d
                    .get(w)
                    .ok_or_else(|| DesignError::MissingColumn(w.clone()))?;
                let v = match col {
                    Column::Factor { .. } => return Err(DesignError::KindChanged(w.clone())),
                    other => other.as_f64().expect("numeric column"),
                };
                if let Some(i) = v.iter().position(|x| *x < 0.0) {
                    return Err(DesignError::NegativeWeight {
                        column: w.clone(),
                        row: i + 1,
                    });
                }
                Ok(v)
            })
            .collect::<Result<_, _>>()?,
        None => vec![vec![1.0 / k as f64; d.n_rows()]; k],
    };
    let levels = level_list(labels.iter().flatten(), known_levels);
    let mut rows = Vec::with_capacity(d.n_rows());
    let mut off_sum = 0usize;
    for i in 0..d.n_rows() {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(k);
        let mut total = 0.0;
        for j in 0..k {
            let g = index_of(&levels, &labels[j][i]);
            let w = weight_cols[j][i];
            total += w;
            match row.iter_mut().find(|(l, _)| *l == g) {
                Some(entry) => entry.1 += w,
                None => row.push((g, w)),
            }
        }
        if (total - 1.0).abs() > 1e-8 {
            off_sum += 1;
        }
        rows.push(row);
    }
    if off_sum > 0 {
        warnings.push(format!(
            "multi-membership weights of {off_sum} row(s) do not sum to 1; they are used as given"
        ));
    }
    Ok((levels, rows))
}

/// Convenience wrapper for mm blocks; identical to [`build_random`].
pub fn build_mm(spec: &GroupBlockSpec, d: &Dataset) -> Result<RandomBlock, DesignError> {
    match spec.grouping {
        Grouping::Mm { .. } => build_random(spec, d),
        Grouping::Factor { .. } => Err(DesignError::NotMultiMembership(spec.grouping.label())),
    }
}
