use std::collections::VecDeque;

use super::{InferError, LogDensity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    /// Stop once the largest absolute gradient entry falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of correction pairs kept by L-BFGS.
    pub history: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            tol: 1e-8,
            max_iter: 2000,
            history: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub point: Vec<f64>,
    pub log_density: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Maximizes a log density by L-BFGS with a Wolfe line search.
pub fn map_estimate<D: LogDensity + ?Sized>(
    target: &D,
    init: &[f64],
    opts: MapOptions,
) -> Result<MapResult, InferError> {
    let n = init.len();
    // Work on f = -log density.
    let eval = |x: &[f64], g: &mut Vec<f64>| {
        let lp = target.log_density_grad(x, g);
        g.iter_mut().for_each(|v| *v = -*v);
        -lp
    };
    let mut x = init.to_vec();
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g);
    if !f.is_finite() {
        return Err(InferError::NonFiniteStart);
    }
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < opts.max_iter {
        if inf_norm(&g) < opts.tol {
            break;
        }
        iterations += 1;
        let mut d = two_loop(&g, &pairs);
        if dot(&d, &g) >= 0.0 {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let step0 = if pairs.is_empty() {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let Some((alpha, f_new, g_new)) = line_search(&eval, &x, f, &g, &d, step0) else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };
        let x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if pairs.len() == opts.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        stalled = if f - f_new <= 1e-15 * f.abs().max(1.0) {
            stalled + 1
        } else {
            0
        };
        x = x_new;
        f = f_new;
        g = g_new;
        if stalled >= 5 {
            break;
        }
    }
    let grad_norm = inf_norm(&g);
    Ok(MapResult {
        point: x,
        log_density: -f,
        grad_norm,
        iterations,
        converged: grad_norm < opts.tol,
    })
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Strong Wolfe search by bracketing and bisection-safeguarded cubic steps.
fn line_search(
    eval: &impl Fn(&[f64], &mut Vec<f64>) -> f64,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    step0: f64,
) -> Option<(f64, f64, Vec<f64>)> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let dg0 = dot(g0, d);
    let n = x.len();
    let probe = |a: f64| {
        let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let mut g = vec![0.0; n];
        let f = eval(&xa, &mut g);
        let dg = dot(&g, d);
        (f, g, dg)
    };
    let (mut lo, mut f_lo, mut dg_lo) = (0.0, f0, dg0);
    let mut hi: Option<(f64, f64, f64)> = None;
    let mut a = step0;
    for _ in 0..60 {
        let (f, g, dg) = probe(a);
        if !f.is_finite() || f > f0 + C1 * a * dg0 || f >= f_lo {
            hi = Some((a, f, dg));
        } else if dg.abs() <= -C2 * dg0 {
            return Some((a, f, g));
        } else {
            let flip = match hi {
                None => dg >= 0.0,
                Some((h, _, _)) => dg * (h - lo) >= 0.0,
            };
            if flip {
                hi = Some((lo, f_lo, dg_lo));
            }
            lo = a;
            f_lo = f;
            dg_lo = dg;
            if hi.is_none() {
                a *= 2.0;
                continue;
            }
        }
        let (h, f_hi, dg_hi) = hi.expect("bracket");
        a = interpolate(lo, f_lo, dg_lo, h, f_hi, dg_hi);
        if (h - lo).abs() < 1e-16 * lo.abs().max(1.0) {
            break;
        }
    }
    (lo > 0.0).then(|| {
        let (f, g, _) = probe(lo);
        (lo, f, g)
    })
}

fn interpolate(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let mid = 0.5 * (a + b);
    if !fb.is_finite() {
        return a + 0.25 * (b - a);
    }
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}
