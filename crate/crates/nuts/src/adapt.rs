//! Warmup adaptation: dual-averaging step size and windowed diagonal metric.

const GAMMA: f64 = 0.05;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

const INIT_BUFFER: usize = 75;
const TERM_BUFFER: usize = 50;
const BASE_WINDOW: usize = 25;

/// Nesterov dual averaging of log step size.
#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    target: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub(crate) fn new(target: f64, step_size: f64) -> Self {
        Self { target, mu: (10.0 * step_size).ln(), counter: 0.0, s_bar: 0.0, x_bar: 0.0 }
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub(crate) fn update(&mut self, accept_stat: f64) -> f64 {
        let accept_stat = if accept_stat.is_finite() { accept_stat.clamp(0.0, 1.0) } else { 0.0 };
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept_stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / GAMMA;
        let x_eta = self.counter.powf(-KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// Step size to use once adaptation stops.
    pub(crate) fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Running per-coordinate variance (Welford).
#[derive(Debug, Clone)]
pub(crate) struct RunningVariance {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub(crate) fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub(crate) fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    /// Sample variances shrunk toward one with weight `5 / (n + 5)`.
    pub(crate) fn regularized(&self) -> Vec<f64> {
        let n = self.n as f64;
        let w = n / (n + 5.0);
        self.m2
            .iter()
            .map(|s| {
                let var = if self.n > 1 { s / (n - 1.0) } else { 1.0 };
                w * var + (1.0 - w)
            })
            .collect()
    }

    pub(crate) fn reset(&mut self) {
        self.n = 0;
        self.mean.iter_mut().for_each(|v| *v = 0.0);
        self.m2.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Metric-adaptation windows as half-open warmup iteration ranges.
///
/// 75 initial iterations of step-size-only adaptation, then windows of
/// 25, 50, 100, ... iterations, then a 50-iteration terminal buffer. The
/// last slow window is stretched to meet the terminal buffer. Short warmups
/// use 15% / 75% / 10% proportions instead.
pub(crate) fn metric_windows(n_tune: usize) -> Vec<(usize, usize)> {
    if n_tune < 20 {
        return Vec::new();
    }
    let (init, term, base) = if INIT_BUFFER + TERM_BUFFER + BASE_WINDOW > n_tune {
        let init = (0.15 * n_tune as f64) as usize;
        let term = (0.1 * n_tune as f64) as usize;
        (init, term, n_tune - init - term)
    } else {
        (INIT_BUFFER, TERM_BUFFER, BASE_WINDOW)
    };
    let last = n_tune - term;
    let mut windows = Vec::new();
    let mut start = init;
    let mut size = base;
    while start < last {
        let mut end = start + size;
        if end + 2 * size > last {
            end = last;
        }
        windows.push((start, end));
        start = end;
        size *= 2;
    }
    windows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_windows_match_expanding_schedule() {
        let w = metric_windows(1000);
        assert_eq!(w, vec![(75, 100), (100, 150), (150, 250), (250, 450), (450, 950)]);
    }

    #[test]
    fn short_warmup_uses_proportional_buffers() {
        let w = metric_windows(100);
        assert_eq!(w.first().unwrap().0, 15);
        assert_eq!(w.last().unwrap().1, 90);
        assert!(metric_windows(10).is_empty());
    }

    #[test]
    fn regularization_pulls_toward_one() {
        let mut rv = RunningVariance::new(1);
        for x in [0.0, 2.0, 4.0, 6.0, 8.0] {
            rv.add(&[x]);
        }
        // sample variance 10, n = 5: 0.5 * 10 + 0.5 * 1
        assert!((rv.regularized()[0] - 5.5).abs() < 1e-12);
    }

    #[test]
    fn dual_averaging_shrinks_step_on_low_acceptance() {
        let mut da = DualAveraging::new(0.8, 1.0);
        let mut eps = 1.0;
        for _ in 0..50 {
            eps = da.update(0.1);
        }
        assert!(eps < 0.1);
    }
}
