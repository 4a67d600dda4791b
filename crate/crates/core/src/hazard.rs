//! Hierarchical hazard model for state transitions.
//!
//! The hazard of pump `i` in state `k` is
//! `λ = exp(log λ0[k] + βᵀx + u_raw[i]·σ_u)` and the probability of leaving
//! the state within `Δt` days is `1 − exp(−λΔt)`. Priors:
//! `log λ0[k] ~ N(−5, 2²)`, `β_j ~ N(0, 1)`, `u_raw[i] ~ N(0, 1)`,
//! `σ_u ~ Half-Normal(1)`.
//!
//! The sampler sees the flat unconstrained vector
//! `[log λ0[1..=K], β[0..p], u_raw[0..N], ζ]` with `σ_u = exp(ζ)`; the
//! log-Jacobian `ζ` is added to the log posterior.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use hazlingam_nuts::LogDensity;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Lower bound on a transition probability used on the `y = 1` branch.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub mu_log_lambda0: f64,
    pub sd_log_lambda0: f64,
    pub sd_beta: f64,
    pub sigma_u_scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { mu_log_lambda0: -5.0, sd_log_lambda0: 2.0, sd_beta: 1.0, sigma_u_scale: 1.0 }
    }
}

impl PriorSpec {
    pub fn is_valid(&self) -> bool {
        self.sd_log_lambda0 > 0.0 && self.sd_beta > 0.0 && self.sigma_u_scale > 0.0
    }
}

/// Positions of each parameter block in the unconstrained vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub n_states: usize,
    pub n_covariates: usize,
    pub n_pumps: usize,
}

impl ParamLayout {
    pub fn for_dataset(data: &Dataset) -> Self {
        Self { n_states: data.n_states, n_covariates: data.n_covariates, n_pumps: data.n_pumps }
    }

    pub fn dim(&self) -> usize {
        self.n_states + self.n_covariates + self.n_pumps + 1
    }

    /// Index of `log λ0` for 1-based state `k`.
    pub fn log_lambda0(&self, k: usize) -> usize {
        k - 1
    }

    pub fn beta(&self, j: usize) -> usize {
        self.n_states + j
    }

    pub fn u_raw(&self, i: usize) -> usize {
        self.n_states + self.n_covariates + i
    }

    pub fn zeta(&self) -> usize {
        self.dim() - 1
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        names.extend((1..=self.n_states).map(|k| format!("log_lambda0[{k}]")));
        names.extend((0..self.n_covariates).map(|j| format!("beta[{j}]")));
        names.extend((0..self.n_pumps).map(|i| format!("u_raw[{i}]")));
        names.push("log_sigma_u".to_string());
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub log_lambda0: Vec<f64>,
    pub beta: Vec<f64>,
    pub u_raw: Vec<f64>,
    pub sigma_u: f64,
}

impl ModelParams {
    pub fn layout(&self) -> ParamLayout {
        ParamLayout { n_states: self.log_lambda0.len(), n_covariates: self.beta.len(), n_pumps: self.u_raw.len() }
    }

    /// Random effect `u_i = u_raw[i]·σ_u`.
    pub fn u(&self, i: usize) -> f64 {
        self.u_raw[i] * self.sigma_u
    }

    pub fn to_unconstrained(&self) -> UnconstrainedParams {
        let mut v = Vec::with_capacity(self.layout().dim());
        v.extend_from_slice(&self.log_lambda0);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.u_raw);
        v.push(self.sigma_u.ln());
        UnconstrainedParams(v)
    }
}

/// Flat sampler-space vector; `σ_u` is stored as `ζ = log σ_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedParams(pub Vec<f64>);

impl UnconstrainedParams {
    pub fn to_params(&self, layout: &ParamLayout) -> ModelParams {
        let v = &self.0;
        assert_eq!(v.len(), layout.dim(), "parameter vector length");
        let (k, p, n) = (layout.n_states, layout.n_covariates, layout.n_pumps);
        ModelParams {
            log_lambda0: v[..k].to_vec(),
            beta: v[k..k + p].to_vec(),
            u_raw: v[k + p..k + p + n].to_vec(),
            sigma_u: v[layout.zeta()].exp(),
        }
    }
}

fn linear_predictor(log_lambda0: f64, beta: &[f64], x: &[f64], u: f64) -> f64 {
    log_lambda0 + beta.iter().zip(x).map(|(b, x)| b * x).sum::<f64>() + u
}

/// Hazard rate for pump `i` in 1-based state `k`.
pub fn hazard_rate(params: &ModelParams, k: usize, x: &[f64], i: usize) -> f64 {
    linear_predictor(params.log_lambda0[k - 1], &params.beta, x, params.u(i)).exp()
}

/// Probability of leaving the state within `delta_t`, kept at or above
/// [`PROB_FLOOR`].
pub fn transition_prob(lambda: f64, delta_t: f64) -> f64 {
    (-(-lambda * delta_t).exp_m1()).max(PROB_FLOOR)
}

/// `log(1 − exp(−m))` for `m > 0`, accurate at both ends.
fn log1mexp(m: f64) -> f64 {
    if m <= LN_2 {
        (-(-m).exp_m1()).ln()
    } else {
        (-(-m).exp()).ln_1p()
    }
}

/// Log-likelihood of one observation and its derivative with respect to
/// the log hazard `η`, given `m = λΔt`.
fn obs_loglik(m: f64, y: bool) -> (f64, f64) {
    if !y {
        (-m, -m)
    } else if m < PROB_FLOOR {
        (PROB_FLOOR.ln(), 0.0)
    } else {
        // d/dη log(1 − e^{−m}) = m e^{−m} / (1 − e^{−m}) = m / (e^m − 1)
        (log1mexp(m), m / m.exp_m1())
    }
}

pub fn log_likelihood(params: &ModelParams, data: &Dataset) -> f64 {
    data.observations
        .iter()
        .map(|o| {
            let lambda = hazard_rate(params, o.state_index as usize, &o.x, o.pump_index);
            obs_loglik(lambda * o.delta_t, o.y).0
        })
        .sum()
}

fn normal_logpdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * z * z
}

fn half_normal_logpdf(x: f64, scale: f64) -> f64 {
    0.5 * (2.0 / PI).ln() - scale.ln() - 0.5 * (x / scale).powi(2)
}

/// Normalized log prior density in constrained space.
pub fn log_prior(params: &ModelParams, prior: &PriorSpec) -> f64 {
    let l0: f64 =
        params.log_lambda0.iter().map(|&v| normal_logpdf(v, prior.mu_log_lambda0, prior.sd_log_lambda0)).sum();
    let beta: f64 = params.beta.iter().map(|&b| normal_logpdf(b, 0.0, prior.sd_beta)).sum();
    let u: f64 = params.u_raw.iter().map(|&u| normal_logpdf(u, 0.0, 1.0)).sum();
    l0 + beta + u + half_normal_logpdf(params.sigma_u, prior.sigma_u_scale)
}

/// The posterior over the flat unconstrained vector, shared read-only
/// across sampler threads.
#[derive(Debug, Clone)]
pub struct HazardModel {
    data: Arc<Dataset>,
    prior: PriorSpec,
    layout: ParamLayout,
}

impl HazardModel {
    pub fn new(data: Arc<Dataset>, prior: PriorSpec) -> Self {
        let layout = ParamLayout::for_dataset(&data);
        Self { data, prior, layout }
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn log_posterior(&self, theta: &UnconstrainedParams) -> f64 {
        let params = theta.to_params(&self.layout);
        log_likelihood(&params, &self.data) + log_prior(&params, &self.prior) + theta.0[self.layout.zeta()]
    }

    pub fn grad_log_posterior(&self, theta: &UnconstrainedParams) -> Vec<f64> {
        let mut grad = vec![0.0; self.layout.dim()];
        self.value_and_grad(&theta.0, &mut grad);
        grad
    }

    /// Log posterior and analytic gradient in one pass over the data.
    pub fn value_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let layout = &self.layout;
        assert_eq!(theta.len(), layout.dim(), "parameter vector length");
        assert_eq!(grad.len(), layout.dim(), "gradient length");
        let prior = &self.prior;
        let (k_n, p) = (layout.n_states, layout.n_covariates);
        let beta = &theta[k_n..k_n + p];
        let zeta = theta[layout.zeta()];
        let sigma = zeta.exp();

        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut lp = 0.0;
        let mut d_sigma = 0.0;

        for o in &self.data.observations {
            let k = o.state_index as usize;
            let ui = layout.u_raw(o.pump_index);
            let u_raw = theta[ui];
            let eta = linear_predictor(theta[k - 1], beta, &o.x, u_raw * sigma);
            let m = eta.exp() * o.delta_t;
            let (ll, d_eta) = obs_loglik(m, o.y);
            lp += ll;
            grad[k - 1] += d_eta;
            for (j, x) in o.x.iter().enumerate() {
                grad[k_n + j] += d_eta * x;
            }
            grad[ui] += d_eta * sigma;
            d_sigma += d_eta * u_raw;
        }

        let var_l0 = prior.sd_log_lambda0 * prior.sd_log_lambda0;
        for k in 0..k_n {
            let v = theta[k];
            lp += normal_logpdf(v, prior.mu_log_lambda0, prior.sd_log_lambda0);
            grad[k] -= (v - prior.mu_log_lambda0) / var_l0;
        }
        let var_b = prior.sd_beta * prior.sd_beta;
        for j in 0..p {
            let b = theta[k_n + j];
            lp += normal_logpdf(b, 0.0, prior.sd_beta);
            grad[k_n + j] -= b / var_b;
        }
        for i in 0..layout.n_pumps {
            let idx = layout.u_raw(i);
            lp += normal_logpdf(theta[idx], 0.0, 1.0);
            grad[idx] -= theta[idx];
        }
        // Half-normal on σ plus the log-Jacobian ζ; chain rule dσ/dζ = σ.
        let s2 = prior.sigma_u_scale * prior.sigma_u_scale;
        lp += half_normal_logpdf(sigma, prior.sigma_u_scale) + zeta;
        grad[layout.zeta()] = d_sigma * sigma - sigma * sigma / s2 + 1.0;
        lp
    }
}

impl LogDensity for HazardModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn logp_and_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        self.value_and_grad(position, grad)
    }
}
