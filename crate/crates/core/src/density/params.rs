use nalgebra::DMatrix;
use serde::Serialize;

use super::DensityError;
use crate::design::DesignSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    /// Population-level coefficients of a predictor, smooth fixed parts last.
    Beta { predictor: usize },
    /// Log of a smooth's standard deviation.
    SmoothSd { predictor: usize, smooth: usize },
    /// Standardized penalized smooth coefficients.
    SmoothZ { predictor: usize, smooth: usize },
    /// Standardized group effects, level-major.
    GroupZ { block: usize },
    /// Log standard deviations of a block.
    GroupSd { block: usize },
    /// Unconstrained rows of the correlation factor.
    GroupCor { block: usize },
    /// Log of a constant sigma.
    Sigma,
    /// Logit of a constant zero-inflation probability.
    Zi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Identifier used in generated programs, e.g. `b_zi`, `z_1`, `L_1`.
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub element_names: Vec<String>,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct BlockShape {
    pub label: String,
    pub n_levels: usize,
    pub q: usize,
    pub correlated: bool,
    pub coef_names: Vec<String>,
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct SmoothShape {
    pub predictor: usize,
    pub smooth: usize,
    pub id: String,
    pub n_penalized: usize,
}

/// Layout of the unconstrained parameter vector and of a constrained draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpace {
    segments: Vec<Segment>,
    dim: usize,
    pub(crate) beta_len: Vec<usize>,
    pub(crate) beta_names: Vec<Vec<String>>,
    pub(crate) smooths: Vec<SmoothShape>,
    pub(crate) blocks: Vec<BlockShape>,
    has_sigma: bool,
    has_zi: bool,
    draw_names: Vec<String>,
}

/// Number of unconstrained correlation parameters of a block.
pub fn n_cor_params(q: usize) -> usize {
    q * q.saturating_sub(1) / 2
}

/// Lower-triangular factor with unit-norm rows from unconstrained values.
/// Row `i` is `(v, 1) / ‖(v, 1)‖` with `v` the next `i` values.
pub fn chol_from_raw(q: usize, raw: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(q, q);
    l[(0, 0)] = 1.0;
    let mut k = 0;
    for i in 1..q {
        let v = &raw[k..k + i];
        let s = (1.0 + v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        for j in 0..i {
            l[(i, j)] = v[j] / s;
        }
        l[(i, i)] = 1.0 / s;
        k += i;
    }
    l
}

/// Inverse of [`chol_from_raw`].
pub fn raw_from_chol(l: &DMatrix<f64>) -> Vec<f64> {
    let q = l.nrows();
    let mut out = Vec::with_capacity(n_cor_params(q));
    for i in 1..q {
        for j in 0..i {
            out.push(l[(i, j)] / l[(i, i)]);
        }
    }
    out
}

/// Smooth identifier: `sarea_1`, `sigma_sarea_1`.
fn smooth_id(design: &DesignSet, p: usize, s: usize) -> String {
    design.predictors[p].smooths[s].fixed_name()
}

impl ParamSpace {
    pub fn new(design: &DesignSet) -> ParamSpace {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |kind, name: String, element_names: Vec<String>| {
            let len = element_names.len();
            segments.push(Segment {
                kind,
                name,
                offset,
                len,
                element_names,
            });
            offset += len;
        };
        let mut beta_len = Vec::new();
        let mut beta_names = Vec::new();
        let mut smooths = Vec::new();
        for (p, pred) in design.predictors.iter().enumerate() {
            let prefix = crate::modelspec::coef_prefix(&pred.owner);
            let mut names: Vec<String> = pred
                .fixed
                .column_names()
                .iter()
                .map(|n| format!("b_{prefix}{n}"))
                .collect();
            names.extend(
                pred.smooths
                    .iter()
                    .map(|s| format!("bs_{}", s.fixed_name())),
            );
            let seg_name = if pred.owner == "mu" {
                "b".to_string()
            } else {
                format!("b_{}", pred.owner)
            };
            beta_len.push(names.len());
            beta_names.push(names.clone());
            push(SegmentKind::Beta { predictor: p }, seg_name, names);
            for (s, sm) in pred.smooths.iter().enumerate() {
                let id = smooth_id(design, p, s);
                push(
                    SegmentKind::SmoothSd {
                        predictor: p,
                        smooth: s,
                    },
                    format!("sds_{id}"),
                    vec![format!("log_sds_{id}")],
                );
                push(
                    SegmentKind::SmoothZ {
                        predictor: p,
                        smooth: s,
                    },
                    format!("zs_{id}"),
                    (1..=sm.n_penalized())
                        .map(|k| format!("zs_{id}[{k}]"))
                        .collect(),
                );
                smooths.push(SmoothShape {
                    predictor: p,
                    smooth: s,
                    id,
                    n_penalized: sm.n_penalized(),
                });
            }
        }
        let mut blocks = Vec::new();
        for (b, block) in design.random.iter().enumerate() {
            let label = block.label();
            let q = block.q();
            let correlated = block.spec.correlated && q > 1;
            let tag = b + 1;
            push(
                SegmentKind::GroupZ { block: b },
                format!("z_{tag}"),
                block
                    .levels
                    .iter()
                    .flat_map(|l| {
                        block
                            .coef_names
                            .iter()
                            .map(|c| format!("z_{label}[{l},{c}]"))
                            .collect::<Vec<_>>()
                    })
                    .collect(),
            );
            push(
                SegmentKind::GroupSd { block: b },
                format!("sd_{tag}"),
                block
                    .coef_names
                    .iter()
                    .map(|c| format!("log_sd_{label}__{c}"))
                    .collect(),
            );
            if correlated {
                let mut names = Vec::new();
                for i in 1..q {
                    for j in 0..i {
                        names.push(format!("L_raw_{label}[{},{}]", i + 1, j + 1));
                    }
                }
                push(
                    SegmentKind::GroupCor { block: b },
                    format!("L_{tag}"),
                    names,
                );
            }
            blocks.push(BlockShape {
                label,
                n_levels: block.n_levels(),
                q,
                correlated,
                coef_names: block.coef_names.clone(),
                levels: block.levels.clone(),
            });
        }
        let has_sigma = design.constant_dpars.iter().any(|d| d == "sigma");
        let has_zi = design.constant_dpars.iter().any(|d| d == "zi");
        if has_sigma {
            push(SegmentKind::Sigma, "sigma".into(), vec!["log_sigma".into()]);
        }
        if has_zi {
            push(SegmentKind::Zi, "zi".into(), vec!["logit_zi".into()]);
        }
        let dim = offset;
        let mut space = ParamSpace {
            segments,
            dim,
            beta_len,
            beta_names,
            smooths,
            blocks,
            has_sigma,
            has_zi,
            draw_names: Vec::new(),
        };
        space.draw_names = space.build_draw_names();
        space
    }

    fn build_draw_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.beta_names.iter().flatten().cloned().collect();
        for s in &self.smooths {
            out.push(format!("sds_{}", s.id));
            out.extend((1..=s.n_penalized).map(|k| format!("s_{}[{k}]", s.id)));
        }
        for b in &self.blocks {
            let label = &b.label;
            out.extend(b.coef_names.iter().map(|c| format!("sd_{label}__{c}")));
            if b.correlated {
                for i in 0..b.q {
                    for j in i + 1..b.q {
                        out.push(format!(
                            "cor_{label}__{}__{}",
                            b.coef_names[i], b.coef_names[j]
                        ));
                    }
                }
            }
            for l in &b.levels {
                out.extend(b.coef_names.iter().map(|c| format!("r_{label}[{l},{c}]")));
            }
        }
        if self.has_sigma {
            out.push("sigma".into());
        }
        if self.has_zi {
            out.push("zi".into());
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, kind: SegmentKind) -> Option<&Segment> {
        self.segments.iter().find(|s| s.kind == kind)
    }

    /// Names of the unconstrained coordinates.
    pub fn names(&self) -> Vec<String> {
        self.segments
            .iter()
            .flat_map(|s| s.element_names.iter().cloned())
            .collect()
    }

    /// Names of a constrained draw, as written to draw files.
    pub fn draw_names(&self) -> &[String] {
        &self.draw_names
    }

    /// Parameter identifiers and derived-quantity identifiers of the model
    /// program: segments first, then group effects `r_*` and smooth
    /// coefficients `s_*`.
    pub fn program_names(&self) -> (Vec<String>, Vec<String>) {
        let params = self.segments.iter().map(|s| s.name.clone()).collect();
        let mut derived: Vec<String> = self.smooths.iter().map(|s| format!("s_{}", s.id)).collect();
        derived.extend((1..=self.blocks.len()).map(|b| format!("r_{b}")));
        (params, derived)
    }

    fn seg<'a>(&self, x: &'a [f64], kind: SegmentKind) -> &'a [f64] {
        let s = self.segment(kind).expect("segment exists");
        &x[s.range()]
    }

    /// Maps an unconstrained vector to named constrained quantities.
    pub fn constrain(&self, x: &[f64]) -> Result<ConstrainedView, DensityError> {
        if x.len() != self.dim {
            return Err(DensityError::Length {
                expected: self.dim,
                found: x.len(),
            });
        }
        let beta = (0..self.beta_len.len())
            .map(|p| self.seg(x, SegmentKind::Beta { predictor: p }).to_vec())
            .collect();
        let mut smooth_sds: Vec<Vec<f64>> = vec![Vec::new(); self.beta_len.len()];
        let mut smooth_coefs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.beta_len.len()];
        for s in &self.smooths {
            let sds = self.seg(
                x,
                SegmentKind::SmoothSd {
                    predictor: s.predictor,
                    smooth: s.smooth,
                },
            )[0]
            .exp();
            let z = self.seg(
                x,
                SegmentKind::SmoothZ {
                    predictor: s.predictor,
                    smooth: s.smooth,
                },
            );
            smooth_sds[s.predictor].push(sds);
            smooth_coefs[s.predictor].push(z.iter().map(|v| sds * v).collect());
        }
        let mut sd = Vec::new();
        let mut chol = Vec::new();
        let mut u = Vec::new();
        for (b, shape) in self.blocks.iter().enumerate() {
            let s: Vec<f64> = self
                .seg(x, SegmentKind::GroupSd { block: b })
                .iter()
                .map(|v| v.exp())
                .collect();
            let l = if shape.correlated {
                chol_from_raw(shape.q, self.seg(x, SegmentKind::GroupCor { block: b }))
            } else {
                DMatrix::identity(shape.q, shape.q)
            };
            let z = self.seg(x, SegmentKind::GroupZ { block: b });
            u.push(scale_and_correlate(z, shape.n_levels, &s, &l));
            sd.push(s);
            chol.push(l);
        }
        let sigma = self
            .has_sigma
            .then(|| self.seg(x, SegmentKind::Sigma)[0].exp());
        let zi = self
            .has_zi
            .then(|| crate::modelspec::Link::Logit.inverse(self.seg(x, SegmentKind::Zi)[0]));
        Ok(ConstrainedView {
            beta,
            smooth_sds,
            smooth_coefs,
            sd,
            chol,
            u,
            sigma,
            zi,
        })
    }

    /// Inverse of [`ParamSpace::constrain`].
    pub fn unconstrain(&self, view: &ConstrainedView) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for seg in &self.segments {
            let out = &mut x[seg.range()];
            match seg.kind {
                SegmentKind::Beta { predictor } => out.copy_from_slice(&view.beta[predictor]),
                SegmentKind::SmoothSd { predictor, smooth } => {
                    out[0] = view.smooth_sds[predictor][smooth].ln()
                }
                SegmentKind::SmoothZ { predictor, smooth } => {
                    let sds = view.smooth_sds[predictor][smooth];
                    for (o, c) in out.iter_mut().zip(&view.smooth_coefs[predictor][smooth]) {
                        *o = c / sds;
                    }
                }
                SegmentKind::GroupZ { block } => {
                    let shape = &self.blocks[block];
                    let inv = view.chol[block]
                        .clone()
                        .try_inverse()
                        .expect("factor is invertible");
                    for g in 0..shape.n_levels {
                        let scaled = nalgebra::DVector::from_fn(shape.q, |c, _| {
                            view.u[block][(g, c)] / view.sd[block][c]
                        });
                        let z = &inv * scaled;
                        out[g * shape.q..(g + 1) * shape.q].copy_from_slice(z.as_slice());
                    }
                }
                SegmentKind::GroupSd { block } => {
                    for (o, s) in out.iter_mut().zip(&view.sd[block]) {
                        *o = s.ln();
                    }
                }
                SegmentKind::GroupCor { block } => {
                    out.copy_from_slice(&raw_from_chol(&view.chol[block]))
                }
                SegmentKind::Sigma => out[0] = view.sigma.expect("sigma present").ln(),
                SegmentKind::Zi => {
                    out[0] = crate::modelspec::Link::Logit.apply(view.zi.expect("zi present"))
                }
            }
        }
        x
    }

    /// A constrained draw in the order of [`ParamSpace::draw_names`].
    pub fn flatten(&self, view: &ConstrainedView) -> Vec<f64> {
        let mut out: Vec<f64> = view.beta.iter().flatten().copied().collect();
        for s in &self.smooths {
            out.push(view.smooth_sds[s.predictor][s.smooth]);
            out.extend(&view.smooth_coefs[s.predictor][s.smooth]);
        }
        for (b, shape) in self.blocks.iter().enumerate() {
            out.extend(&view.sd[b]);
            if shape.correlated {
                let cor = view.correlation(b);
                for i in 0..shape.q {
                    for j in i + 1..shape.q {
                        out.push(cor[(i, j)]);
                    }
                }
            }
            for g in 0..shape.n_levels {
                out.extend((0..shape.q).map(|c| view.u[b][(g, c)]));
            }
        }
        out.extend(view.sigma);
        out.extend(view.zi);
        out
    }

    /// Rebuilds the constrained quantities from a stored draw.
    pub fn view_from_draw(&self, row: &[f64]) -> Result<ConstrainedView, DensityError> {
        if row.len() != self.draw_names.len() {
            return Err(DensityError::Length {
                expected: self.draw_names.len(),
                found: row.len(),
            });
        }
        let mut it = row.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        let beta: Vec<Vec<f64>> = self.beta_len.iter().map(|&n| take(n)).collect();
        let mut smooth_sds: Vec<Vec<f64>> = vec![Vec::new(); self.beta_len.len()];
        let mut smooth_coefs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.beta_len.len()];
        for s in &self.smooths {
            smooth_sds[s.predictor].push(take(1)[0]);
            smooth_coefs[s.predictor].push(take(s.n_penalized));
        }
        let mut sd = Vec::new();
        let mut chol = Vec::new();
        let mut u = Vec::new();
        for shape in &self.blocks {
            let q = shape.q;
            sd.push(take(q));
            let l = if shape.correlated {
                let vals = take(n_cor_params(q));
                let mut cor = DMatrix::identity(q, q);
                let mut k = 0;
                for i in 0..q {
                    for j in i + 1..q {
                        cor[(i, j)] = vals[k];
                        cor[(j, i)] = vals[k];
                        k += 1;
                    }
                }
                cholesky_of_correlation(cor)
            } else {
                DMatrix::identity(q, q)
            };
            chol.push(l);
            let vals = take(shape.n_levels * q);
            u.push(DMatrix::from_row_slice(shape.n_levels, q, &vals));
        }
        let sigma = self.has_sigma.then(|| take(1)[0]);
        let zi = self.has_zi.then(|| take(1)[0]);
        Ok(ConstrainedView {
            beta,
            smooth_sds,
            smooth_coefs,
            sd,
            chol,
            u,
            sigma,
            zi,
        })
    }
}

/// Cholesky factor of a correlation matrix; a small ridge is added when
/// rounding has made it numerically indefinite.
fn cholesky_of_correlation(cor: DMatrix<f64>) -> DMatrix<f64> {
    let q = cor.nrows();
    let mut ridge = 0.0;
    loop {
        let m = &cor + DMatrix::identity(q, q) * ridge;
        if let Some(c) = m.cholesky() {
            let mut l = c.l();
            for i in 0..q {
                let norm = l.row(i).norm();
                for j in 0..=i {
                    l[(i, j)] /= norm;
                }
            }
            return l;
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 10.0 };
    }
}

/// `u_g = diag(sd) · L · z_g` for every level `g`; `z` is level-major.
pub fn scale_and_correlate(
    z: &[f64],
    n_levels: usize,
    sd: &[f64],
    l: &DMatrix<f64>,
) -> DMatrix<f64> {
    let q = sd.len();
    let mut u = DMatrix::zeros(n_levels, q);
    for g in 0..n_levels {
        let zg = &z[g * q..(g + 1) * q];
        for c in 0..q {
            let lz: f64 = (0..=c).map(|k| l[(c, k)] * zg[k]).sum();
            u[(g, c)] = sd[c] * lz;
        }
    }
    u
}

/// Named constrained quantities of one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedView {
    /// Per predictor: fixed coefficients followed by smooth fixed parts.
    pub beta: Vec<Vec<f64>>,
    pub smooth_sds: Vec<Vec<f64>>,
    /// Penalized smooth coefficients `sds · zs` per predictor and smooth.
    pub smooth_coefs: Vec<Vec<Vec<f64>>>,
    pub sd: Vec<Vec<f64>>,
    /// Correlation factor per block (identity when uncorrelated).
    pub chol: Vec<DMatrix<f64>>,
    /// Group effects per block, levels × coefficients.
    pub u: Vec<DMatrix<f64>>,
    pub sigma: Option<f64>,
    pub zi: Option<f64>,
}

impl ConstrainedView {
    pub fn correlation(&self, block: usize) -> DMatrix<f64> {
        let l = &self.chol[block];
        l * l.transpose()
    }
}
