//! Multinomial No-U-Turn sampling with the generalized U-turn criterion,
//! dual-averaging step size and windowed diagonal metric adaptation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::draws::{ChainDraws, Draws};
use super::{InferError, LogDensity, SamplerConfig};
use crate::density::{ParamSpace, Posterior};

const MAX_DELTA_H: f64 = 1000.0;
const INIT_TRIES: usize = 100;
const INIT_RADIUS: f64 = 2.0;

#[derive(Debug, Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    lp: f64,
}

/// Per-transition sampler output.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Transition {
    pub accept_stat: f64,
    pub depth: usize,
    pub divergent: bool,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct Tree {
    h0: f64,
    sign: f64,
    n_leapfrog: usize,
    sum_metro: f64,
    divergent: bool,
}

pub(crate) struct Nuts<'a, D: LogDensity + ?Sized> {
    target: &'a D,
    pub rng: ChaCha8Rng,
    pub eps: f64,
    pub inv_metric: Vec<f64>,
    pub max_depth: usize,
    z: State,
}

impl<'a, D: LogDensity + ?Sized> Nuts<'a, D> {
    pub fn new(target: &'a D, rng: ChaCha8Rng, q: Vec<f64>, max_depth: usize) -> Self {
        let n = q.len();
        let mut g = vec![0.0; n];
        let lp = target.log_density_grad(&q, &mut g);
        Nuts {
            target,
            rng,
            eps: 1.0,
            inv_metric: vec![1.0; n],
            max_depth,
            z: State {
                q,
                p: vec![0.0; n],
                g,
                lp,
            },
        }
    }

    pub fn position(&self) -> &[f64] {
        &self.z.q
    }

    pub fn log_density(&self) -> f64 {
        self.z.lp
    }

    fn hamiltonian(&self, z: &State) -> f64 {
        let k: f64 =
            z.p.iter()
                .zip(&self.inv_metric)
                .map(|(p, m)| m * p * p)
                .sum();
        let h = -z.lp + 0.5 * k;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, z: &State) -> Vec<f64> {
        z.p.iter()
            .zip(&self.inv_metric)
            .map(|(p, m)| m * p)
            .collect()
    }

    fn sample_momentum(&mut self) {
        for (p, m) in self.z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = self.rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut State, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.lp = self.target.log_density_grad(&z.q, &mut z.g);
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
    }

    /// Doubles or halves the step size until one leapfrog step crosses an
    /// acceptance probability of 0.8.
    pub fn init_stepsize(&mut self) -> Result<(), String> {
        if self.eps == 0.0 || self.eps > 1e7 || self.eps.is_nan() {
            return Ok(());
        }
        let start = self.z.clone();
        let log08 = 0.8f64.ln();
        let mut direction = 0.0;
        loop {
            self.z = start.clone();
            self.sample_momentum();
            let h0 = self.hamiltonian(&self.z);
            let mut z = self.z.clone();
            self.leapfrog(&mut z, self.eps);
            let delta = h0 - self.hamiltonian(&z);
            if direction == 0.0 {
                direction = if delta > log08 { 1.0 } else { -1.0 };
                continue;
            }
            if (direction > 0.0 && !(delta > log08)) || (direction < 0.0 && !(delta < log08)) {
                break;
            }
            self.eps = if direction > 0.0 {
                self.eps * 2.0
            } else {
                self.eps * 0.5
            };
            if self.eps > 1e7 {
                self.z = start;
                return Err("posterior is improper; step size grew without bound".into());
            }
            if self.eps == 0.0 {
                self.z = start;
                return Err("no acceptably small step size".into());
            }
        }
        self.z = start;
        Ok(())
    }

    pub fn transition(&mut self) -> Transition {
        self.sample_momentum();
        let n = self.z.q.len();
        let h0 = self.hamiltonian(&self.z);
        let mut z_fwd = self.z.clone();
        let mut z_bck = self.z.clone();
        let mut z_sample = self.z.clone();
        let mut z_propose = self.z.clone();

        let p0 = self.z.p.clone();
        let ps0 = self.p_sharp(&self.z);
        let (mut p_fwd_fwd, mut p_fwd_bck, mut p_bck_fwd, mut p_bck_bck) =
            (p0.clone(), p0.clone(), p0.clone(), p0.clone());
        let (mut ps_fwd_fwd, mut ps_fwd_bck, mut ps_bck_fwd, mut ps_bck_bck) =
            (ps0.clone(), ps0.clone(), ps0.clone(), ps0);
        let mut rho = p0;
        let mut log_sum_weight = 0.0;
        let mut depth = 0;
        let mut tree = Tree {
            h0,
            sign: 1.0,
            n_leapfrog: 0,
            sum_metro: 0.0,
            divergent: false,
        };

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; n];
            let mut rho_bck = vec![0.0; n];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if self.rng.random::<f64>() > 0.5 {
                rho_bck.clone_from(&rho);
                p_bck_fwd.clone_from(&p_fwd_bck);
                ps_bck_fwd.clone_from(&ps_fwd_bck);
                tree.sign = 1.0;
                let mut z = z_fwd.clone();
                let ok = self.build_tree(
                    depth,
                    &mut z,
                    &mut z_propose,
                    &mut ps_fwd_bck,
                    &mut ps_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    &mut lsw_subtree,
                    &mut tree,
                );
                z_fwd = z;
                ok
            } else {
                rho_fwd.clone_from(&rho);
                p_fwd_bck.clone_from(&p_bck_fwd);
                ps_fwd_bck.clone_from(&ps_bck_fwd);
                tree.sign = -1.0;
                let mut z = z_bck.clone();
                let ok = self.build_tree(
                    depth,
                    &mut z,
                    &mut z_propose,
                    &mut ps_bck_fwd,
                    &mut ps_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    &mut lsw_subtree,
                    &mut tree,
                );
                z_bck = z;
                ok
            };
            if !valid {
                break;
            }
            depth += 1;
            if lsw_subtree > log_sum_weight {
                z_sample = z_propose.clone();
            } else {
                let accept = (lsw_subtree - log_sum_weight).exp();
                if self.rng.random::<f64>() < accept {
                    z_sample = z_propose.clone();
                }
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
            rho = add(&rho_bck, &rho_fwd);
            let mut persist = criterion(&ps_bck_bck, &ps_fwd_fwd, &rho);
            let ext = add(&rho_bck, &p_fwd_bck);
            persist &= criterion(&ps_bck_bck, &ps_fwd_bck, &ext);
            let ext = add(&rho_fwd, &p_bck_fwd);
            persist &= criterion(&ps_bck_fwd, &ps_fwd_fwd, &ext);
            if !persist {
                break;
            }
        }
        self.z = z_sample;
        let accept_stat = if tree.n_leapfrog > 0 {
            tree.sum_metro / tree.n_leapfrog as f64
        } else {
            0.0
        };
        Transition {
            accept_stat,
            depth,
            divergent: tree.divergent,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z: &mut State,
        z_propose: &mut State,
        ps_beg: &mut Vec<f64>,
        ps_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        log_sum_weight: &mut f64,
        tree: &mut Tree,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, tree.sign * self.eps);
            tree.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - tree.h0 > MAX_DELTA_H {
                tree.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, tree.h0 - h);
            tree.sum_metro += if tree.h0 - h > 0.0 {
                1.0
            } else {
                (tree.h0 - h).exp()
            };
            z_propose.clone_from(z);
            *ps_beg = self.p_sharp(z);
            ps_end.clone_from(ps_beg);
            rho.iter_mut().zip(&z.p).for_each(|(r, p)| *r += p);
            p_beg.clone_from(&z.p);
            p_end.clone_from(p_beg);
            return !tree.divergent;
        }
        let n = rho.len();
        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; n];
        let mut ps_init_end = vec![0.0; n];
        let mut rho_init = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            ps_beg,
            &mut ps_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            &mut lsw_init,
            tree,
        ) {
            return false;
        }
        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; n];
        let mut ps_final_beg = vec![0.0; n];
        let mut rho_final = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut ps_final_beg,
            ps_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            &mut lsw_final,
            tree,
        ) {
            return false;
        }
        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (lsw_final - lsw_subtree).exp();
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }
        let rho_subtree = add(&rho_init, &rho_final);
        rho.iter_mut().zip(&rho_subtree).for_each(|(r, s)| *r += s);
        let mut persist = criterion(ps_beg, ps_end, &rho_subtree);
        let ext = add(&rho_init, &p_final_beg);
        persist &= criterion(ps_beg, &ps_final_beg, &ext);
        let ext = add(&rho_final, &p_init_end);
        persist &= criterion(&ps_init_end, ps_end, &ext);
        persist
    }
}

/// Nesterov dual averaging of the log step size.
#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    mu: f64,
    delta: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const KAPPA: f64 = 0.75;
    const T0: f64 = 10.0;

    pub fn new(delta: f64, eps: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps).ln(),
            delta,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    pub fn restart(&mut self, eps: f64) {
        self.mu = (10.0 * eps).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let x_eta = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    pub fn final_stepsize(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Warmup schedule: a fast initial buffer, doubling slow windows that
/// estimate the metric, and a fast terminal buffer.
#[derive(Debug, Clone)]
pub(crate) struct Windows {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_end: usize,
    counter: usize,
    sums: Vec<f64>,
    sq: Vec<f64>,
    n: usize,
}

impl Windows {
    pub fn new(warmup: usize, dim: usize) -> Option<Self> {
        if warmup < 20 {
            return None;
        }
        let (mut init_buffer, mut term_buffer, mut base) = (75, 50, 25);
        if init_buffer + base + term_buffer > warmup {
            init_buffer = (0.15 * warmup as f64) as usize;
            term_buffer = (0.1 * warmup as f64) as usize;
            base = warmup - (init_buffer + term_buffer);
        }
        Some(Windows {
            warmup,
            init_buffer,
            term_buffer,
            window_size: base,
            next_end: init_buffer + base - 1,
            counter: 0,
            sums: vec![0.0; dim],
            sq: vec![0.0; dim],
            n: 0,
        })
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.warmup - self.term_buffer
            && self.counter != self.warmup
    }

    fn window_ends(&self) -> bool {
        self.counter == self.next_end && self.counter != self.warmup
    }

    fn advance_window(&mut self) {
        let last = self.warmup - self.term_buffer - 1;
        if self.next_end == last {
            return;
        }
        self.window_size *= 2;
        self.next_end = self.counter + self.window_size;
        if self.next_end != last {
            let boundary = self.next_end + 2 * self.window_size;
            if boundary >= self.warmup - self.term_buffer {
                self.next_end = last;
            }
        }
    }

    /// Records a warmup position; returns a new inverse metric at the end
    /// of a slow window.
    pub fn learn(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if self.in_window() {
            // Welford updates stored as running mean and M2.
            self.n += 1;
            let n = self.n as f64;
            for ((m, s), &x) in self.sums.iter_mut().zip(self.sq.iter_mut()).zip(q) {
                let d = x - *m;
                *m += d / n;
                *s += d * (x - *m);
            }
        }
        let out = if self.window_ends() {
            self.advance_window();
            let n = self.n as f64;
            let metric = self
                .sq
                .iter()
                .map(|s| {
                    let var = if self.n > 1 { s / (n - 1.0) } else { 1.0 };
                    (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
                })
                .collect();
            self.sums.iter_mut().for_each(|v| *v = 0.0);
            self.sq.iter_mut().for_each(|v| *v = 0.0);
            self.n = 0;
            Some(metric)
        } else {
            None
        };
        self.counter += 1;
        out
    }
}

/// Random uniform(-2, 2) inits, retried until the density is finite.
fn initial_point<D: LogDensity + ?Sized>(
    target: &D,
    rng: &mut ChaCha8Rng,
    chain: usize,
) -> Result<Vec<f64>, InferError> {
    let n = target.dim();
    let mut g = vec![0.0; n];
    for _ in 0..INIT_TRIES {
        let q: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-INIT_RADIUS..INIT_RADIUS))
            .collect();
        let lp = target.log_density_grad(&q, &mut g);
        if lp.is_finite() && g.iter().all(|v| v.is_finite()) {
            return Ok(q);
        }
    }
    Err(InferError::Init {
        chain,
        tries: INIT_TRIES,
    })
}

pub(crate) fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Runs one chain; `record` maps a kept position to its stored values.
pub(crate) fn run_chain<D: LogDensity + ?Sized>(
    target: &D,
    config: &SamplerConfig,
    chain: usize,
    record: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
) -> Result<ChainDraws, InferError> {
    let mut rng = chain_rng(config.seed, chain);
    let q0 = initial_point(target, &mut rng, chain)?;
    let mut nuts = Nuts::new(target, rng, q0, config.max_treedepth);
    let step_err = |reason: String| InferError::StepSize { chain, reason };
    nuts.init_stepsize().map_err(step_err)?;
    let mut da = DualAveraging::new(config.adapt_delta, nuts.eps);
    let mut windows = Windows::new(config.warmup, target.dim());
    let mut out = ChainDraws::with_capacity(config.kept());
    for _ in 0..config.warmup {
        let t = nuts.transition();
        if t.divergent {
            out.warmup_divergences += 1;
        }
        nuts.eps = da.learn(t.accept_stat);
        if let Some(metric) = windows.as_mut().and_then(|w| w.learn(nuts.position())) {
            nuts.inv_metric = metric;
            nuts.init_stepsize().map_err(step_err)?;
            da.restart(nuts.eps);
        }
    }
    if config.warmup > 0 {
        nuts.eps = da.final_stepsize();
    }
    for i in 0..config.iter - config.warmup {
        let t = nuts.transition();
        if (i + 1) % config.thin != 0 {
            continue;
        }
        out.values.push(record(nuts.position()));
        out.lp.push(nuts.log_density());
        out.accept_stat.push(t.accept_stat);
        out.treedepth.push(t.depth);
        out.divergent.push(t.divergent);
    }
    out.step_size = nuts.eps;
    out.inv_metric = nuts.inv_metric.clone();
    Ok(out)
}

/// Runs all chains in parallel; results are ordered by chain index.
pub(crate) fn sample_with<D: LogDensity + ?Sized>(
    target: &D,
    config: &SamplerConfig,
    names: Vec<String>,
    record: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
) -> Result<Draws, InferError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.cores.max(1))
        .build()
        .map_err(|e| InferError::Config(e.to_string()))?;
    let chains = pool.install(|| {
        (0..config.chains)
            .into_par_iter()
            .map(|c| run_chain(target, config, c, record))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Draws { names, chains })
}

/// Samples a compiled posterior; draws are stored on the constrained scale.
pub fn sample(posterior: &Posterior, config: &SamplerConfig) -> Result<Draws, InferError> {
    let space: &ParamSpace = posterior.space();
    let record = |q: &[f64]| {
        let view = space.constrain(q).expect("length checked by the sampler");
        space.flatten(&view)
    };
    sample_with(posterior, config, space.draw_names().to_vec(), &record)
}

/// Samples an arbitrary target; draws are the raw coordinates.
pub fn sample_target<D: LogDensity + ?Sized>(
    target: &D,
    config: &SamplerConfig,
    names: Vec<String>,
) -> Result<Draws, InferError> {
    if names.len() != target.dim() {
        return Err(InferError::Mismatch(names.len(), target.dim()));
    }
    sample_with(target, config, names, &|q: &[f64]| q.to_vec())
}
