//! No-U-Turn sampling with windowed warmup adaptation.
//!
//! The sampler runs several independent chains in parallel. Each chain
//! adapts its step size by dual averaging toward a target acceptance
//! statistic and estimates a diagonal mass matrix over expanding warmup
//! windows. Trajectories are built by repeated doubling with multinomial
//! sampling of the proposal and the generalized U-turn criterion.
//!
//! Randomness comes from ChaCha8 with one stream per chain: chain `c` of a
//! run seeded with `s` uses `ChaCha8Rng::seed_from_u64(s)` switched to
//! stream `c`. Identical seeds therefore reproduce draws bit for bit,
//! independent of thread scheduling.
//!
//! ```
//! use hazlingam_nuts::{sample, FnDensity, SamplerConfig};
//!
//! let target = FnDensity::new(1, |x: &[f64], g: &mut [f64]| {
//!     g[0] = -x[0];
//!     -0.5 * x[0] * x[0]
//! });
//! let config = SamplerConfig { n_draws: 200, n_tune: 200, n_chains: 2, seed: 7, ..Default::default() };
//! let samples = sample(&target, 1, &config).unwrap();
//! assert_eq!(samples.param_chains(0).len(), 2);
//! ```

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod adapt;
pub mod diagnostics;
mod error;
pub mod export;
mod sampler;

pub use diagnostics::{ess, hdi, split_rhat, ParamDiagnostics};
pub use error::SamplerError;
pub use sampler::{sample, ChainStats, PosteriorSamples, SamplerConfig};

/// A differentiable log density on unconstrained real space.
///
/// Implementations must be safe to evaluate concurrently from several
/// chains. A non-finite return value marks the point as outside the support.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Returns the log density at `position` and writes its gradient into `grad`.
    fn logp_and_grad(&self, position: &[f64], grad: &mut [f64]) -> f64;
}

/// Adapts a closure into a [`LogDensity`].
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LogDensity for FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn logp_and_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(position, grad)
    }
}
