use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{metric_windows, DualAveraging, RunningVariance};
use crate::diagnostics::{ess, split_rhat, ParamDiagnostics};
use crate::{LogDensity, SamplerError};

const INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_draws: usize,
    pub n_tune: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    pub max_tree_depth: u32,
    /// Energy error above which a trajectory is declared divergent.
    pub max_energy_error: f64,
    /// Initial points are drawn uniformly from `[-init_radius, init_radius]`.
    pub init_radius: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_draws: 2000,
            n_tune: 1000,
            n_chains: 8,
            target_accept: 0.95,
            max_tree_depth: 10,
            max_energy_error: 1000.0,
            init_radius: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |msg: &str| Err(SamplerError::InvalidConfig(msg.to_string()));
        if self.n_draws < 1 {
            return bad("n_draws must be at least 1");
        }
        if self.n_tune < 1 {
            return bad("n_tune must be at least 1");
        }
        if self.n_chains < 1 {
            return bad("n_chains must be at least 1");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie strictly between 0 and 1");
        }
        if self.max_tree_depth < 1 {
            return bad("max_tree_depth must be at least 1");
        }
        if !(self.init_radius > 0.0) || !(self.max_energy_error > 0.0) {
            return bad("init_radius and max_energy_error must be positive");
        }
        Ok(())
    }
}

/// Per-chain sampler statistics over the kept draws.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub step_size: f64,
    pub mean_accept: f64,
    pub mean_tree_depth: f64,
    pub max_tree_depth_hits: usize,
    pub n_leapfrog: usize,
    pub inv_metric: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub dim: usize,
    pub n_chains: usize,
    pub n_draws: usize,
    /// Row-major `[chain][draw][param]`.
    pub draws: Vec<f64>,
    pub chains: Vec<ChainStats>,
    pub diagnostics: Vec<ParamDiagnostics>,
}

impl PosteriorSamples {
    /// Assembles samples from per-chain draw blocks and computes diagnostics.
    pub fn from_chains(dim: usize, chain_draws: Vec<Vec<f64>>, chains: Vec<ChainStats>) -> Self {
        let n_chains = chain_draws.len();
        let n_draws = chain_draws.first().map_or(0, |c| c.len() / dim.max(1));
        let draws: Vec<f64> = chain_draws.into_iter().flatten().collect();
        let mut samples = Self { dim, n_chains, n_draws, draws, chains, diagnostics: Vec::new() };
        samples.diagnostics = (0..dim)
            .map(|j| {
                let per_chain = samples.param_chains(j);
                ParamDiagnostics { rhat: split_rhat(&per_chain), ess_bulk: ess(&per_chain) }
            })
            .collect();
        samples
    }

    pub fn draw(&self, chain: usize, draw: usize) -> &[f64] {
        let start = (chain * self.n_draws + draw) * self.dim;
        &self.draws[start..start + self.dim]
    }

    /// All draws of one parameter, one vector per chain.
    pub fn param_chains(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains).map(|c| (0..self.n_draws).map(|d| self.draw(c, d)[param]).collect()).collect()
    }

    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.dim.max(1))
    }

    pub fn total_divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    pub fn max_rhat(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.rhat).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.ess_bulk).fold(f64::INFINITY, f64::min)
    }
}

/// Runs `config.n_chains` NUTS chains on `target`.
pub fn sample<T: LogDensity + ?Sized>(
    target: &T,
    dim: usize,
    config: &SamplerConfig,
) -> Result<PosteriorSamples, SamplerError> {
    config.validate()?;
    if target.dim() != dim {
        return Err(SamplerError::DimensionMismatch { target: target.dim(), requested: dim });
    }
    let results: Vec<Result<(Vec<f64>, ChainStats), SamplerError>> =
        (0..config.n_chains).into_par_iter().map(|chain| run_chain(target, dim, config, chain)).collect();
    let mut draws = Vec::with_capacity(config.n_chains);
    let mut stats = Vec::with_capacity(config.n_chains);
    for r in results {
        let (d, s) = r?;
        draws.push(d);
        stats.push(s);
    }
    Ok(PosteriorSamples::from_chains(dim, draws, stats))
}

pub(crate) fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    dim: usize,
    config: &SamplerConfig,
    chain: usize,
) -> Result<(Vec<f64>, ChainStats), SamplerError> {
    let mut rng = chain_rng(config.seed, chain);
    let mut current = initial_point(target, dim, config, chain, &mut rng)?;

    let mut inv_metric = vec![1.0; dim];
    let mut step = init_step_size(target, &current, &inv_metric, 1.0, &mut rng);
    let mut da = DualAveraging::new(config.target_accept, step);
    let windows = metric_windows(config.n_tune);
    let mut window_idx = 0;
    let mut running = RunningVariance::new(dim);
    let mut warmup_divergences = 0;

    for iter in 0..config.n_tune {
        let (next, info) = transition(target, &current, &inv_metric, step, config, &mut rng);
        current = next;
        if info.divergent {
            warmup_divergences += 1;
        }
        step = da.update(info.accept_stat);

        if let Some(&(start, end)) = windows.get(window_idx) {
            if iter >= start && iter < end {
                running.add(&current.q);
            }
            if iter + 1 == end {
                inv_metric = running.regularized();
                running.reset();
                window_idx += 1;
                step = init_step_size(target, &current, &inv_metric, step, &mut rng);
                da = DualAveraging::new(config.target_accept, step);
            }
        }
    }
    step = da.final_step_size();

    let mut draws = Vec::with_capacity(config.n_draws * dim);
    let mut divergences = 0;
    let mut accept_sum = 0.0;
    let mut depth_sum = 0usize;
    let mut depth_hits = 0;
    let mut n_leapfrog = 0;
    for _ in 0..config.n_draws {
        let (next, info) = transition(target, &current, &inv_metric, step, config, &mut rng);
        current = next;
        draws.extend_from_slice(&current.q);
        if info.divergent {
            divergences += 1;
        }
        accept_sum += info.accept_stat;
        depth_sum += info.depth as usize;
        if info.depth >= config.max_tree_depth {
            depth_hits += 1;
        }
        n_leapfrog += info.n_leapfrog;
    }
    let n = config.n_draws as f64;
    Ok((
        draws,
        ChainStats {
            divergences,
            warmup_divergences,
            step_size: step,
            mean_accept: accept_sum / n,
            mean_tree_depth: depth_sum as f64 / n,
            max_tree_depth_hits: depth_hits,
            n_leapfrog,
            inv_metric,
        },
    ))
}

fn initial_point<T: LogDensity + ?Sized>(
    target: &T,
    dim: usize,
    config: &SamplerConfig,
    chain: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Point, SamplerError> {
    for _ in 0..INIT_ATTEMPTS {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-config.init_radius..=config.init_radius)).collect();
        let point = Point::at(target, q);
        if point.logp.is_finite() && point.grad.iter().all(|g| g.is_finite()) {
            return Ok(point);
        }
    }
    Err(SamplerError::Initialization { chain, attempts: INIT_ATTEMPTS })
}

#[derive(Debug, Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

impl Point {
    fn at<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = target.logp_and_grad(&q, &mut grad);
        let p = vec![0.0; q.len()];
        Self { q, p, grad, logp }
    }

    fn kinetic(&self, inv_metric: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn energy(&self, inv_metric: &[f64]) -> f64 {
        let h = -self.logp + self.kinetic(inv_metric);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, inv_metric: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_metric).map(|(p, m)| p * m).collect()
    }

    fn resample_momentum(&mut self, inv_metric: &[f64], rng: &mut ChaCha8Rng) {
        for (p, m) in self.p.iter_mut().zip(inv_metric) {
            let z: f64 = rng.sample(StandardNormal);
            *p = z / m.sqrt();
        }
    }

    fn leapfrog<T: LogDensity + ?Sized>(&self, target: &T, inv_metric: &[f64], eps: f64) -> Point {
        let half = 0.5 * eps;
        let mut p: Vec<f64> = self.p.iter().zip(&self.grad).map(|(p, g)| p + half * g).collect();
        let q: Vec<f64> = self.q.iter().zip(&p).zip(inv_metric).map(|((q, p), m)| q + eps * m * p).collect();
        let mut grad = vec![0.0; q.len()];
        let logp = target.logp_and_grad(&q, &mut grad);
        for (p, g) in p.iter_mut().zip(&grad) {
            *p += half * g;
        }
        Point { q, p, grad, logp }
    }
}

/// Heuristic initial step size: double or halve until the one-step
/// acceptance crosses 0.8.
fn init_step_size<T: LogDensity + ?Sized>(
    target: &T,
    start: &Point,
    inv_metric: &[f64],
    initial: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let threshold = 0.8f64.ln();
    let mut eps = if initial.is_finite() && initial > 0.0 { initial } else { 1.0 };
    let mut point = start.clone();
    let mut one_step = |eps: f64, rng: &mut ChaCha8Rng| {
        point.resample_momentum(inv_metric, rng);
        let h0 = point.energy(inv_metric);
        let next = point.leapfrog(target, inv_metric, eps);
        h0 - next.energy(inv_metric)
    };
    let direction = if one_step(eps, rng) > threshold { 1 } else { -1 };
    for _ in 0..100 {
        eps = if direction == 1 { eps * 2.0 } else { eps * 0.5 };
        let delta = one_step(eps, rng);
        let crossed = if direction == 1 { !(delta > threshold) } else { !(delta < threshold) };
        if crossed {
            break;
        }
    }
    eps.clamp(1e-10, 1e7)
}

struct TransitionInfo {
    accept_stat: f64,
    divergent: bool,
    depth: u32,
    n_leapfrog: usize,
}

struct Trajectory<'a, T: ?Sized> {
    target: &'a T,
    inv_metric: &'a [f64],
    eps: f64,
    h0: f64,
    max_energy_error: f64,
}

struct Subtree {
    left: Point,
    right: Point,
    proposal: Point,
    log_weight: f64,
    rho: Vec<f64>,
    sum_accept: f64,
    n_steps: usize,
    divergent: bool,
    turning: bool,
}

impl Subtree {
    fn stopped(&self) -> bool {
        self.divergent || self.turning
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl<T: LogDensity + ?Sized> Trajectory<'_, T> {
    fn turning(&self, rho: &[f64], left: &Point, right: &Point) -> bool {
        dot(&left.p_sharp(self.inv_metric), rho) <= 0.0 || dot(&right.p_sharp(self.inv_metric), rho) <= 0.0
    }

    /// U-turn check across a merge of two adjacent trees (in time order),
    /// including the checks that straddle the junction.
    fn merged_turning(&self, a: &Subtree, b: &Subtree, rho: &[f64]) -> bool {
        if self.turning(rho, &a.left, &b.right) {
            return true;
        }
        let rho_a_ext = add(&a.rho, &b.left.p);
        if self.turning(&rho_a_ext, &a.left, &b.left) {
            return true;
        }
        let rho_b_ext = add(&b.rho, &a.right.p);
        self.turning(&rho_b_ext, &a.right, &b.right)
    }

    fn leaf(&self, edge: &Point, dir: f64) -> Subtree {
        let next = edge.leapfrog(self.target, self.inv_metric, dir * self.eps);
        let h = next.energy(self.inv_metric);
        let log_weight = self.h0 - h;
        let divergent = !(h - self.h0 <= self.max_energy_error);
        let sum_accept = if log_weight > 0.0 { 1.0 } else { log_weight.exp() };
        Subtree {
            rho: next.p.clone(),
            left: next.clone(),
            right: next.clone(),
            proposal: next,
            log_weight,
            sum_accept,
            n_steps: 1,
            divergent,
            turning: false,
        }
    }

    fn build(&self, edge: &Point, depth: u32, dir: f64, rng: &mut ChaCha8Rng) -> Subtree {
        if depth == 0 {
            return self.leaf(edge, dir);
        }
        let inner = self.build(edge, depth - 1, dir, rng);
        if inner.stopped() {
            return inner;
        }
        let outer_edge = if dir > 0.0 { &inner.right } else { &inner.left };
        let mut outer = self.build(outer_edge, depth - 1, dir, rng);
        let sum_accept = inner.sum_accept + outer.sum_accept;
        let n_steps = inner.n_steps + outer.n_steps;
        if outer.stopped() {
            outer.sum_accept = sum_accept;
            outer.n_steps = n_steps;
            return outer;
        }
        let log_weight = log_add_exp(inner.log_weight, outer.log_weight);
        let take_outer = rng.random::<f64>() < (outer.log_weight - log_weight).exp();
        let (a, b) = if dir > 0.0 { (inner, outer) } else { (outer, inner) };
        let rho = add(&a.rho, &b.rho);
        let turning = self.merged_turning(&a, &b, &rho);
        let a_is_inner = dir > 0.0;
        let (a_prop, b_prop) = (a.proposal, b.proposal);
        let proposal = match (take_outer, a_is_inner) {
            (true, true) | (false, false) => b_prop,
            _ => a_prop,
        };
        Subtree {
            left: a.left,
            right: b.right,
            proposal,
            log_weight,
            rho,
            sum_accept,
            n_steps,
            divergent: false,
            turning,
        }
    }
}

fn transition<T: LogDensity + ?Sized>(
    target: &T,
    current: &Point,
    inv_metric: &[f64],
    eps: f64,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> (Point, TransitionInfo) {
    let mut start = current.clone();
    start.resample_momentum(inv_metric, rng);
    let traj =
        Trajectory { target, inv_metric, eps, h0: start.energy(inv_metric), max_energy_error: config.max_energy_error };

    let mut tree = Subtree {
        rho: start.p.clone(),
        left: start.clone(),
        right: start.clone(),
        proposal: start,
        log_weight: 0.0,
        sum_accept: 0.0,
        n_steps: 0,
        divergent: false,
        turning: false,
    };
    let mut sum_accept = 0.0;
    let mut n_steps = 0;
    let mut divergent = false;
    let mut depth = 0;

    while depth < config.max_tree_depth {
        let dir = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let edge = if dir > 0.0 { &tree.right } else { &tree.left };
        let new = traj.build(edge, depth, dir, rng);
        sum_accept += new.sum_accept;
        n_steps += new.n_steps;
        if new.divergent {
            divergent = true;
            break;
        }
        if new.turning {
            break;
        }
        depth += 1;

        // Biased progressive sampling favours the newer subtree.
        let accept = (new.log_weight - tree.log_weight).exp();
        let take_new = accept >= 1.0 || rng.random::<f64>() < accept;
        let log_weight = log_add_exp(tree.log_weight, new.log_weight);
        let (a, b, new_is_b) = if dir > 0.0 { (tree, new, true) } else { (new, tree, false) };
        let rho = add(&a.rho, &b.rho);
        let turning = traj.merged_turning(&a, &b, &rho);
        let (a_prop, b_prop) = (a.proposal, b.proposal);
        let proposal = match (take_new, new_is_b) {
            (true, true) | (false, false) => b_prop,
            _ => a_prop,
        };
        tree = Subtree {
            left: a.left,
            right: b.right,
            proposal,
            log_weight,
            rho,
            sum_accept: 0.0,
            n_steps: 0,
            divergent: false,
            turning,
        };
        if turning {
            break;
        }
    }

    let accept_stat = if n_steps > 0 { sum_accept / n_steps as f64 } else { 0.0 };
    let mut next = tree.proposal;
    next.p.iter_mut().for_each(|p| *p = 0.0);
    (next, TransitionInfo { accept_stat, divergent, depth, n_leapfrog: n_steps })
}
