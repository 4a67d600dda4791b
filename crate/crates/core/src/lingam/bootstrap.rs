//! Percentile bootstrap over full re-runs of the analysis.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{destandardize, fit, to_rows, LingamConfig};

/// Per-edge bootstrap summaries, indexed `[from][to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n_resamples: usize,
    /// Resamples whose ICA hit the iteration limit; their estimates are kept.
    pub n_unconverged: usize,
    /// Resamples where the analysis failed outright; they contribute zeros.
    pub n_failed: usize,
    pub ci_low: Vec<Vec<f64>>,
    pub ci_high: Vec<Vec<f64>>,
    pub ci_low_raw: Vec<Vec<f64>>,
    pub ci_high_raw: Vec<Vec<f64>>,
    /// Share of resamples agreeing with the majority sign.
    pub sign_stability: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Resample {
    std: DMatrix<f64>,
    raw: DMatrix<f64>,
    converged: bool,
    failed: bool,
}

/// Re-runs standardization, ICA, ordering and regression on `n_resamples`
/// row resamples of `raw` and summarizes each edge.
///
/// Resample `b` draws its rows from `ChaCha8Rng::seed_from_u64(seed)` on
/// stream `b + 1`; the same stream then supplies that resample's ICA seed.
pub fn bootstrap_cis(
    raw: &DMatrix<f64>,
    names: &[String],
    n_resamples: usize,
    config: &LingamConfig,
) -> BootstrapSummary {
    assert!(n_resamples > 0, "at least one resample");
    let (n, v) = raw.shape();
    let results: Vec<Resample> = (0..n_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64 + 1);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sample = raw.select_rows(&rows);
            match fit(&sample, names, config, rng.random()) {
                Ok(f) => Resample {
                    raw: destandardize(&f.adjacency, &f.standardized.sds),
                    std: f.adjacency,
                    converged: f.ica.converged,
                    failed: false,
                },
                Err(e) => {
                    log::debug!("bootstrap resample {b} failed: {e}");
                    Resample { std: DMatrix::zeros(v, v), raw: DMatrix::zeros(v, v), converged: false, failed: true }
                }
            }
        })
        .collect();

    let mut ci_low = DMatrix::zeros(v, v);
    let mut ci_high = DMatrix::zeros(v, v);
    let mut ci_low_raw = DMatrix::zeros(v, v);
    let mut ci_high_raw = DMatrix::zeros(v, v);
    let mut stability = DMatrix::zeros(v, v);
    let mut vals = Vec::with_capacity(n_resamples);
    let b = n_resamples as f64;
    for i in 0..v {
        for j in 0..v {
            vals.clear();
            vals.extend(results.iter().map(|r| r.std[(i, j)]));
            let pos = vals.iter().filter(|&&x| x > 0.0).count() as f64;
            let neg = vals.iter().filter(|&&x| x < 0.0).count() as f64;
            stability[(i, j)] = pos.max(neg) / b;
            vals.sort_by(f64::total_cmp);
            ci_low[(i, j)] = quantile(&vals, 0.025);
            ci_high[(i, j)] = quantile(&vals, 0.975);
            vals.clear();
            vals.extend(results.iter().map(|r| r.raw[(i, j)]));
            vals.sort_by(f64::total_cmp);
            ci_low_raw[(i, j)] = quantile(&vals, 0.025);
            ci_high_raw[(i, j)] = quantile(&vals, 0.975);
        }
    }
    BootstrapSummary {
        n_resamples,
        n_unconverged: results.iter().filter(|r| !r.failed && !r.converged).count(),
        n_failed: results.iter().filter(|r| r.failed).count(),
        ci_low: to_rows(&ci_low),
        ci_high: to_rows(&ci_high),
        ci_low_raw: to_rows(&ci_low_raw),
        ci_high_raw: to_rows(&ci_high_raw),
        sign_stability: to_rows(&stability),
    }
}
