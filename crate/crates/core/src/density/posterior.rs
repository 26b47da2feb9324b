use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use super::nl::NlTape;
use super::params::{chol_from_raw, scale_and_correlate, ConstrainedView, ParamSpace, SegmentKind};
use super::priors::{lkj_log_constant, lpdf, lpdf_positive, ResolvedPriors};
use super::{log_sigmoid, zip_log_pmf, DensityError, LN_2PI};
use crate::design::DesignSet;
use crate::modelspec::{Family, Link, PriorDensity, PriorSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
enum NlInput {
    Predictor(usize),
    Covariate(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct NlPlan {
    tape: NlTape,
    inputs: Vec<NlInput>,
}

impl NlPlan {
    fn new(design: &DesignSet) -> Result<Option<NlPlan>, DensityError> {
        let Some(nl) = &design.nl else {
            return Ok(None);
        };
        let tape = NlTape::compile(&nl.expr);
        let inputs = tape
            .slots()
            .iter()
            .map(|s| {
                if let Some(p) = design.predictor_index(s) {
                    Ok(NlInput::Predictor(p))
                } else if let Some(c) = nl.covariates.get_index_of(s) {
                    Ok(NlInput::Covariate(c))
                } else {
                    Err(DensityError::Unbound(s.clone()))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Some(NlPlan { tape, inputs }))
    }

    fn fill(&self, design: &DesignSet, eta: &[Vec<f64>], i: usize, out: &mut [f64]) {
        let covs = &design.nl.as_ref().expect("non-linear design").covariates;
        for (o, input) in out.iter_mut().zip(&self.inputs) {
            *o = match *input {
                NlInput::Predictor(p) => eta[p][i],
                NlInput::Covariate(c) => covs[c][i],
            };
        }
    }

    /// Values of the non-linear predictor for every row.
    fn evaluate(&self, design: &DesignSet, eta: &[Vec<f64>]) -> Result<Vec<f64>, DensityError> {
        let mut vals = vec![0.0; self.tape.len()];
        let mut inputs = vec![0.0; self.inputs.len()];
        (0..design.n)
            .map(|i| {
                self.fill(design, eta, i, &mut inputs);
                self.tape
                    .forward(&inputs, &mut vals)
                    .map_err(|message| DensityError::Domain {
                        row: i + 1,
                        message,
                    })
            })
            .collect()
    }
}

/// Distributional parameters per observation on their natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DparValues {
    pub mu: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub zi: Option<Vec<f64>>,
}

/// Linear predictors of every predictor of `design`.
pub fn linear_predictors(design: &DesignSet, view: &ConstrainedView) -> Vec<Vec<f64>> {
    let n = design.n;
    let mut eta = Vec::with_capacity(design.predictors.len());
    for (p, pred) in design.predictors.iter().enumerate() {
        let mut e = vec![0.0; n];
        let beta = &view.beta[p];
        let nf = pred.fixed.x.ncols();
        add_columns(&mut e, &pred.fixed.x, &beta[..nf]);
        for (s, sm) in pred.smooths.iter().enumerate() {
            add_columns(&mut e, &sm.xs, &beta[nf + s..nf + s + 1]);
            add_columns(&mut e, &sm.zs, &view.smooth_coefs[p][s]);
        }
        eta.push(e);
    }
    for (b, block) in design.random.iter().enumerate() {
        let owners = &design.random_owner_index[b];
        let u = &view.u[b];
        for i in 0..n {
            for (g, c, v) in block.row_entries(i) {
                eta[owners[c]][i] += v * u[(g, c)];
            }
        }
    }
    eta
}

fn add_columns(e: &mut [f64], x: &DMatrix<f64>, coefs: &[f64]) {
    for (j, &b) in coefs.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        for (ei, xi) in e.iter_mut().zip(x.column(j).iter()) {
            *ei += xi * b;
        }
    }
}

fn column_dot(x: &DMatrix<f64>, j: usize, g: &[f64]) -> f64 {
    x.column(j).iter().zip(g).map(|(a, b)| a * b).sum()
}

/// The joint log-posterior of a compiled model over the unconstrained
/// parameter vector of its [`ParamSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    design: DesignSet,
    space: ParamSpace,
    priors: ResolvedPriors,
    nl: Option<NlPlan>,
    y: Vec<f64>,
    lgamma_y1: Vec<f64>,
    mu: Option<usize>,
    sigma: Option<usize>,
    zi: Option<usize>,
    mu_link: Link,
}

impl Posterior {
    pub fn new(design: DesignSet, priors: &[PriorSpec]) -> Result<Posterior, DensityError> {
        let y = design.response.clone().ok_or(DensityError::NoResponse)?;
        let space = ParamSpace::new(&design);
        let resolved = ResolvedPriors::resolve(priors, &design, &space);
        let nl = NlPlan::new(&design)?;
        let lgamma_y1 = if design.family.is_count() {
            y.iter().map(|v| ln_gamma(v + 1.0)).collect()
        } else {
            Vec::new()
        };
        Ok(Posterior {
            mu: if nl.is_some() {
                None
            } else {
                design.predictor_index("mu")
            },
            sigma: design.predictor_index("sigma"),
            zi: design.predictor_index("zi"),
            mu_link: design.family.link("mu").expect("every family has mu"),
            space,
            priors: resolved,
            nl,
            y,
            lgamma_y1,
            design,
        })
    }

    pub fn design(&self) -> &DesignSet {
        &self.design
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn priors(&self) -> &ResolvedPriors {
        &self.priors
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn constrain(&self, x: &[f64]) -> Result<ConstrainedView, DensityError> {
        self.space.constrain(x)
    }

    /// Log density and gradient; a non-finite evaluation yields `-∞` and a
    /// zero gradient.
    pub fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "parameter vector length");
        grad.fill(0.0);
        let lp = match self.likelihood(x, grad) {
            Some(ll) => ll + self.prior(x, grad),
            None => f64::NEG_INFINITY,
        };
        if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            grad.fill(0.0);
            return f64::NEG_INFINITY;
        }
        lp
    }

    pub fn log_posterior_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.dim()];
        let lp = self.log_density_grad(x, &mut g);
        (lp, g)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_posterior_grad(x).0
    }

    /// Prior part including the change-of-variable terms.
    pub fn log_prior(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.prior(x, &mut g)
    }

    /// Weighted log-likelihood; `-∞` on a domain error.
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        self.log_likelihood_grad(x).0
    }

    pub fn log_likelihood_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.dim()];
        let ll = self.likelihood(x, &mut g).unwrap_or(f64::NEG_INFINITY);
        (ll, g)
    }

    /// Distributional parameters of `design` (training or new data).
    pub fn dpar_values(
        &self,
        design: &DesignSet,
        view: &ConstrainedView,
    ) -> Result<DparValues, DensityError> {
        let eta = linear_predictors(design, view);
        let eta_mu = match &self.nl {
            Some(plan) => plan.evaluate(design, &eta)?,
            None => eta[design.predictor_index("mu").expect("linear models have mu")].clone(),
        };
        let mu = eta_mu.iter().map(|&e| self.mu_link.inverse(e)).collect();
        let sigma = match design.family {
            Family::Gaussian => Some(match design.predictor_index("sigma") {
                Some(p) => eta[p].iter().map(|e| e.exp()).collect(),
                None => vec![view.sigma.expect("constant sigma"); design.n],
            }),
            _ => None,
        };
        let zi = match design.family {
            Family::ZeroInflatedPoisson => Some(match design.predictor_index("zi") {
                Some(p) => eta[p].iter().map(|&e| Link::Logit.inverse(e)).collect(),
                None => vec![view.zi.expect("constant zi"); design.n],
            }),
            _ => None,
        };
        Ok(DparValues { mu, sigma, zi })
    }

    /// `w_i · log p(y_i | θ)` for every row of `design`.
    pub fn pointwise_loglik(
        &self,
        design: &DesignSet,
        view: &ConstrainedView,
    ) -> Result<Vec<f64>, DensityError> {
        let y = design.response.as_ref().ok_or(DensityError::NoResponse)?;
        let dp = self.dpar_values(design, view)?;
        (0..design.n)
            .map(|i| {
                let ll = match design.family {
                    Family::Gaussian => {
                        let s = dp.sigma.as_ref().expect("gaussian sigma")[i];
                        let r = (y[i] - dp.mu[i]) / s;
                        -0.5 * LN_2PI - s.ln() - 0.5 * r * r
                    }
                    Family::Poisson => y[i] * dp.mu[i].ln() - dp.mu[i] - ln_gamma(y[i] + 1.0),
                    Family::ZeroInflatedPoisson => {
                        zip_log_pmf(y[i] as u64, dp.mu[i], dp.zi.as_ref().expect("zi")[i])?
                    }
                };
                Ok(design.weights[i] * ll)
            })
            .collect()
    }

    fn seg<'a>(&self, x: &'a [f64], kind: SegmentKind) -> (std::ops::Range<usize>, &'a [f64]) {
        let r = self.space.segment(kind).expect("segment exists").range();
        (r.clone(), &x[r])
    }

    /// Weighted log-likelihood; adds its gradient to `grad`. `None` signals a
    /// domain error in the non-linear predictor.
    fn likelihood(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        let d = &self.design;
        let n = d.n;
        let np = d.predictors.len();
        let mut eta: Vec<Vec<f64>> = Vec::with_capacity(np);
        let mut smooth_coefs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(np);
        for (p, pred) in d.predictors.iter().enumerate() {
            let mut e = vec![0.0; n];
            let (_, beta) = self.seg(x, SegmentKind::Beta { predictor: p });
            let nf = pred.fixed.x.ncols();
            add_columns(&mut e, &pred.fixed.x, &beta[..nf]);
            let mut coefs = Vec::new();
            for (s, sm) in pred.smooths.iter().enumerate() {
                add_columns(&mut e, &sm.xs, &beta[nf + s..nf + s + 1]);
                let sds = self
                    .seg(
                        x,
                        SegmentKind::SmoothSd {
                            predictor: p,
                            smooth: s,
                        },
                    )
                    .1[0]
                    .exp();
                let z = self
                    .seg(
                        x,
                        SegmentKind::SmoothZ {
                            predictor: p,
                            smooth: s,
                        },
                    )
                    .1;
                let c: Vec<f64> = z.iter().map(|v| sds * v).collect();
                add_columns(&mut e, &sm.zs, &c);
                coefs.push(c);
            }
            eta.push(e);
            smooth_coefs.push(coefs);
        }
        struct BlockState {
            sd: Vec<f64>,
            l: DMatrix<f64>,
            u: DMatrix<f64>,
        }
        let mut states = Vec::with_capacity(d.random.len());
        for (b, block) in d.random.iter().enumerate() {
            let shape = &self.space.blocks[b];
            let sd: Vec<f64> = self
                .seg(x, SegmentKind::GroupSd { block: b })
                .1
                .iter()
                .map(|v| v.exp())
                .collect();
            let l = if shape.correlated {
                chol_from_raw(shape.q, self.seg(x, SegmentKind::GroupCor { block: b }).1)
            } else {
                DMatrix::identity(shape.q, shape.q)
            };
            let z = self.seg(x, SegmentKind::GroupZ { block: b }).1;
            let u = scale_and_correlate(z, shape.n_levels, &sd, &l);
            let owners = &d.random_owner_index[b];
            for i in 0..n {
                for (g, c, v) in block.row_entries(i) {
                    eta[owners[c]][i] += v * u[(g, c)];
                }
            }
            states.push(BlockState { sd, l, u });
        }

        let mut g_eta: Vec<Vec<f64>> = vec![vec![0.0; n]; np];
        let log_sigma_const = self.space.segment(SegmentKind::Sigma).map(|s| x[s.offset]);
        let zeta_const = self.space.segment(SegmentKind::Zi).map(|s| x[s.offset]);
        let mut g_log_sigma = 0.0;
        let mut g_zeta = 0.0;
        let mut nl_vals = vec![0.0; self.nl.as_ref().map_or(0, |p| p.tape.len())];
        let mut nl_adj = nl_vals.clone();
        let mut nl_in = vec![0.0; self.nl.as_ref().map_or(0, |p| p.inputs.len())];
        let mut nl_din = nl_in.clone();
        let mut lp = 0.0;
        for i in 0..n {
            let w = d.weights[i];
            if w == 0.0 {
                continue;
            }
            let eta_mu = match &self.nl {
                Some(plan) => {
                    plan.fill(d, &eta, i, &mut nl_in);
                    plan.tape.forward(&nl_in, &mut nl_vals).ok()?
                }
                None => eta[self.mu.expect("linear model has mu")][i],
            };
            let y = self.y[i];
            let (ll, d_mu) = match d.family {
                Family::Gaussian => {
                    let ls = match self.sigma {
                        Some(p) => eta[p][i],
                        None => log_sigma_const.expect("constant sigma"),
                    };
                    let s = ls.exp();
                    let mu = self.mu_link.inverse(eta_mu);
                    let r = (y - mu) / s;
                    let d_ls = w * (r * r - 1.0);
                    match self.sigma {
                        Some(p) => g_eta[p][i] += d_ls,
                        None => g_log_sigma += d_ls,
                    }
                    (
                        -0.5 * LN_2PI - ls - 0.5 * r * r,
                        r / s * self.mu_link.inverse_deriv(eta_mu),
                    )
                }
                Family::Poisson => {
                    let lambda = eta_mu.exp();
                    (y * eta_mu - lambda - self.lgamma_y1[i], y - lambda)
                }
                Family::ZeroInflatedPoisson => {
                    let zeta = match self.zi {
                        Some(p) => eta[p][i],
                        None => zeta_const.expect("constant zi"),
                    };
                    let lambda = eta_mu.exp();
                    let (ll, d_eta, d_zeta) = if y == 0.0 {
                        let a = log_sigmoid(zeta);
                        let b = log_sigmoid(-zeta) - lambda;
                        let ll = super::log_sum_exp(a, b);
                        let pa = (a - ll).exp();
                        let pb = (b - ll).exp();
                        let zi = Link::Logit.inverse(zeta);
                        (ll, -pb * lambda, pa * (1.0 - zi) - pb * zi)
                    } else {
                        let zi = Link::Logit.inverse(zeta);
                        (
                            log_sigmoid(-zeta) + y * eta_mu - lambda - self.lgamma_y1[i],
                            y - lambda,
                            -zi,
                        )
                    };
                    match self.zi {
                        Some(p) => g_eta[p][i] += w * d_zeta,
                        None => g_zeta += w * d_zeta,
                    }
                    (ll, d_eta)
                }
            };
            lp += w * ll;
            let g_mu = w * d_mu;
            match &self.nl {
                Some(plan) => {
                    nl_din.fill(0.0);
                    plan.tape.backward(&nl_vals, g_mu, &mut nl_adj, &mut nl_din);
                    for (k, input) in plan.inputs.iter().enumerate() {
                        if let NlInput::Predictor(p) = *input {
                            g_eta[p][i] += nl_din[k];
                        }
                    }
                }
                None => g_eta[self.mu.expect("linear model has mu")][i] += g_mu,
            }
        }
        if !lp.is_finite() {
            return Some(f64::NEG_INFINITY);
        }

        for (b, block) in d.random.iter().enumerate() {
            let shape = &self.space.blocks[b];
            let st = &states[b];
            let q = shape.q;
            let owners = &d.random_owner_index[b];
            let mut g_u = DMatrix::<f64>::zeros(shape.n_levels, q);
            for i in 0..n {
                for (g, c, v) in block.row_entries(i) {
                    g_u[(g, c)] += v * g_eta[owners[c]][i];
                }
            }
            let (zr, z) = self.seg(x, SegmentKind::GroupZ { block: b });
            let (sr, _) = self.seg(x, SegmentKind::GroupSd { block: b });
            let mut g_l = DMatrix::<f64>::zeros(q, q);
            for g in 0..shape.n_levels {
                let zg = &z[g * q..(g + 1) * q];
                for c in 0..q {
                    let scaled = st.sd[c] * g_u[(g, c)];
                    if scaled == 0.0 {
                        continue;
                    }
                    grad[sr.start + c] += g_u[(g, c)] * st.u[(g, c)];
                    for k in 0..=c {
                        grad[zr.start + g * q + k] += st.l[(c, k)] * scaled;
                        g_l[(c, k)] += scaled * zg[k];
                    }
                }
            }
            if shape.correlated {
                let (cr, raw) = self.seg(x, SegmentKind::GroupCor { block: b });
                let mut off = 0;
                for i in 1..q {
                    let v = &raw[off..off + i];
                    let s2 = 1.0 + v.iter().map(|a| a * a).sum::<f64>();
                    let s = s2.sqrt();
                    let dot: f64 = (0..i).map(|k| g_l[(i, k)] * v[k]).sum::<f64>() + g_l[(i, i)];
                    for k in 0..i {
                        grad[cr.start + off + k] += g_l[(i, k)] / s - dot * v[k] / (s2 * s);
                    }
                    off += i;
                }
            }
        }
        for (p, pred) in d.predictors.iter().enumerate() {
            let ge = &g_eta[p];
            let (br, _) = self.seg(x, SegmentKind::Beta { predictor: p });
            let nf = pred.fixed.x.ncols();
            for j in 0..nf {
                grad[br.start + j] += column_dot(&pred.fixed.x, j, ge);
            }
            for (s, sm) in pred.smooths.iter().enumerate() {
                grad[br.start + nf + s] += column_dot(&sm.xs, 0, ge);
                let (sdr, sds) = self.seg(
                    x,
                    SegmentKind::SmoothSd {
                        predictor: p,
                        smooth: s,
                    },
                );
                let sds = sds[0].exp();
                let (zr, _) = self.seg(
                    x,
                    SegmentKind::SmoothZ {
                        predictor: p,
                        smooth: s,
                    },
                );
                let coefs = &smooth_coefs[p][s];
                for k in 0..sm.zs.ncols() {
                    let gs = column_dot(&sm.zs, k, ge);
                    grad[zr.start + k] += sds * gs;
                    grad[sdr.start] += gs * coefs[k];
                }
            }
        }
        if let Some(s) = self.space.segment(SegmentKind::Sigma) {
            grad[s.offset] += g_log_sigma;
        }
        if let Some(s) = self.space.segment(SegmentKind::Zi) {
            grad[s.offset] += g_zeta;
        }
        Some(lp)
    }

    /// Log prior with Jacobians of the scale and correlation transforms;
    /// adds its gradient to `grad`.
    fn prior(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = 0.0;
        let std_normal = |v: f64| -0.5 * LN_2PI - 0.5 * v * v;
        for (p, dens) in self.priors.beta.iter().enumerate() {
            let (r, beta) = self.seg(x, SegmentKind::Beta { predictor: p });
            for (j, d) in dens.iter().enumerate() {
                if let Some(d) = d {
                    let (v, g) = lpdf(d, beta[j]);
                    lp += v;
                    grad[r.start + j] += g;
                }
            }
        }
        let log_scale = |lp: &mut f64, grad: &mut [f64], idx: usize, dens: &PriorDensity| {
            let s = x[idx].exp();
            let (v, g) = lpdf_positive(dens, s);
            *lp += v + x[idx];
            grad[idx] += g * s + 1.0;
        };
        for (s, dens) in self.space.smooths.iter().zip(&self.priors.smooth_sds) {
            let (r, _) = self.seg(
                x,
                SegmentKind::SmoothSd {
                    predictor: s.predictor,
                    smooth: s.smooth,
                },
            );
            log_scale(&mut lp, grad, r.start, dens);
            let (zr, z) = self.seg(
                x,
                SegmentKind::SmoothZ {
                    predictor: s.predictor,
                    smooth: s.smooth,
                },
            );
            for (k, &v) in z.iter().enumerate() {
                lp += std_normal(v);
                grad[zr.start + k] -= v;
            }
        }
        for (b, shape) in self.space.blocks.iter().enumerate() {
            let (zr, z) = self.seg(x, SegmentKind::GroupZ { block: b });
            for (k, &v) in z.iter().enumerate() {
                lp += std_normal(v);
                grad[zr.start + k] -= v;
            }
            let (sr, _) = self.seg(x, SegmentKind::GroupSd { block: b });
            for c in 0..shape.q {
                log_scale(&mut lp, grad, sr.start + c, &self.priors.sd[b][c]);
            }
            if shape.correlated {
                let eta = self.priors.cor_eta[b];
                let k = shape.q as f64;
                let coef = k + 2.0 * eta - 1.0;
                lp += lkj_log_constant(shape.q, eta);
                let (cr, raw) = self.seg(x, SegmentKind::GroupCor { block: b });
                let mut off = 0;
                for i in 1..shape.q {
                    let v = &raw[off..off + i];
                    let t = 1.0 + v.iter().map(|a| a * a).sum::<f64>();
                    lp -= 0.5 * coef * t.ln();
                    for j in 0..i {
                        grad[cr.start + off + j] -= coef * v[j] / t;
                    }
                    off += i;
                }
            }
        }
        if let (Some(seg), Some(dens)) =
            (self.space.segment(SegmentKind::Sigma), &self.priors.sigma)
        {
            log_scale(&mut lp, grad, seg.offset, dens);
        }
        if let Some(seg) = self.space.segment(SegmentKind::Zi) {
            let zeta = x[seg.offset];
            lp += log_sigmoid(zeta) + log_sigmoid(-zeta);
            grad[seg.offset] += 1.0 - 2.0 * Link::Logit.inverse(zeta);
        }
        lp
    }
}
