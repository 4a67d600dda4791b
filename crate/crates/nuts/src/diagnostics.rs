//! Convergence diagnostics: split-R̂, effective sample size and HDIs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub rhat: f64,
    pub ess_bulk: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Halves every chain; an odd middle draw is discarded.
fn split_chains<C: AsRef<[f64]>>(chains: &[C]) -> Vec<&[f64]> {
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = c.as_ref();
        let half = c.len() / 2;
        halves.push(&c[..half]);
        halves.push(&c[c.len() - half..]);
    }
    halves
}

/// Split-R̂ over the half-chains of every chain (no rank normalization).
///
/// Returns exactly 1.0 when every half-chain is constant at the same value
/// and infinity when they are constant at different values.
pub fn split_rhat<C: AsRef<[f64]>>(chains: &[C]) -> f64 {
    let halves = split_chains(chains);
    let n = halves.first().map_or(0, |h| h.len());
    assert!(n >= 2, "split_rhat needs at least 4 draws per chain");
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| sample_var(h)).sum::<f64>() / halves.len() as f64;
    let b_over_n = sample_var(&means);
    if w <= 0.0 {
        return if b_over_n > 0.0 { f64::INFINITY } else { 1.0 };
    }
    let n = n as f64;
    let var_plus = w * (n - 1.0) / n + b_over_n;
    (var_plus / w).sqrt()
}

fn autocov(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n - lag {
        acc += (x[i] - mean) * (x[i + lag] - mean);
    }
    acc / n as f64
}

/// Effective sample size of split chains using Geyer's initial monotone
/// positive sequence, combined across chains through the multi-chain
/// autocorrelation estimate.
///
/// A parameter that is constant across all draws reports the total draw count.
pub fn ess<C: AsRef<[f64]>>(chains: &[C]) -> f64 {
    let halves = split_chains(chains);
    let m = halves.len();
    let n = halves.first().map_or(0, |h| h.len());
    assert!(n >= 4, "ess needs at least 8 draws per chain");
    let total = (m * n) as f64;
    let all_draws = chains.iter().map(|c| c.as_ref().len()).sum::<usize>() as f64;

    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let acov0: Vec<f64> = halves.iter().zip(&means).map(|(h, &mu)| autocov(h, mu, 0)).collect();
    let nf = n as f64;
    let mean_var = acov0.iter().map(|a| a * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    if !(var_plus > 0.0) || !(mean_var > 0.0) {
        return all_draws;
    }

    let rho_at = |lag: usize| -> f64 {
        let mean_acov = halves.iter().zip(&means).map(|(h, &mu)| autocov(h, mu, lag)).sum::<f64>() / m as f64;
        1.0 - (mean_var - mean_acov) / var_plus
    };

    let mut rho = vec![0.0; n + 2];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho_at(1);
    rho[1] = odd;
    // Stop four lags short so the last pair stays as a bias correction for
    // antithetic chains.
    let mut s = 1;
    while s + 4 < n && even + odd > 0.0 {
        even = rho_at(s + 1);
        odd = rho_at(s + 2);
        if even + odd >= 0.0 {
            rho[s + 1] = even;
            rho[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if even > 0.0 {
        rho[max_s + 1] = even;
    }

    // Initial positive sequence -> initial monotone sequence.
    let mut s = 1;
    while s + 3 <= max_s {
        if rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s] {
            rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
            rho[s + 2] = rho[s + 1];
        }
        s += 2;
    }

    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + rho[max_s + 1];
    (total / tau).min(total * total.log10())
}

/// Shortest interval containing at least `mass` of the draws.
pub fn hdi(draws: &[f64], mass: f64) -> (f64, f64) {
    assert!(!draws.is_empty(), "hdi of empty sample");
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (sorted[0], sorted[k - 1]);
    for i in 1..=n - k {
        let (lo, hi) = (sorted[i], sorted[i + k - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    best
}
