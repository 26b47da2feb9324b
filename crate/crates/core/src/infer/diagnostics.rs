/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`).
pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    sorted_quantile(&s, p)
}

pub(crate) fn sorted_quantile(s: &[f64], p: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [&c[..half], &c[c.len() - half..]]
        })
        .collect()
}

/// Split R̂ over chain halves. `NaN` for a constant parameter or too few
/// draws; `∞` when halves are constant at different values.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) {
        return f64::NAN;
    }
    let halves = split(chains);
    let n = halves.iter().map(|h| h.len()).min().unwrap_or(0);
    let m = halves.len() as f64;
    let nf = n as f64;
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_sd(&h[..n])).collect();
    let w = stats.iter().map(|(_, sd)| sd * sd).sum::<f64>() / m;
    let grand = stats.iter().map(|(mu, _)| mu).sum::<f64>() / m;
    let b = nf
        * stats
            .iter()
            .map(|(mu, _)| (mu - grand) * (mu - grand))
            .sum::<f64>()
        / (m - 1.0);
    if w == 0.0 {
        if b == 0.0 {
            log::warn!("constant parameter: R-hat undefined");
            return f64::NAN;
        }
        return f64::INFINITY;
    }
    let var_plus = w * (nf - 1.0) / nf + b / nf;
    (var_plus / w).sqrt()
}

/// Effective sample size from chain autocovariances, truncated at the
/// first non-positive sum of adjacent lags and made monotone (Geyer's
/// initial monotone sequence).
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    if m == 0 {
        return f64::NAN;
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 4 {
        return f64::NAN;
    }
    let nf = n as f64;
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let acov = |t: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - t)
                    .map(|i| (c[i] - mu) * (c[i + t] - mu))
                    .sum::<f64>()
                    / nf
            })
            .sum::<f64>()
            / m as f64
    };
    let acov0 = acov(0);
    let mean_var = acov0 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        let (_, sd) = mean_sd(&means);
        var_plus += sd * sd;
    }
    if var_plus == 0.0 || !var_plus.is_finite() {
        return f64::NAN;
    }
    let rho_at = |t: usize| 1.0 - (mean_var - acov(t)) / var_plus;
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho_at(1);
    rho[1] = odd;
    let mut t = 0;
    while t + 5 < n && even + odd > 0.0 {
        t += 2;
        even = rho_at(t);
        odd = rho_at(t + 1);
        if even + odd >= 0.0 {
            rho[t] = even;
            rho[t + 1] = odd;
        }
    }
    let max_t = t;
    if even > 0.0 && max_t + 1 < n {
        rho[max_t + 1] = even;
    }
    let mut t = 1;
    while t + 2 <= max_t {
        let prev = rho[t - 1] + rho[t];
        if rho[t + 1] + rho[t + 2] > prev {
            rho[t + 1] = prev / 2.0;
            rho[t + 2] = prev / 2.0;
        }
        t += 2;
    }
    let total = m as f64 * nf;
    let mut tau = -1.0 + 2.0 * rho[..=max_t].iter().sum::<f64>();
    if max_t + 1 < n {
        tau += rho[max_t + 1];
    }
    tau = tau.max(1.0 / total.log10());
    total / tau
}
