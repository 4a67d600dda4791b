#![allow(clippy::needless_range_loop)]

use hazlingam_core::features::EPS;

/// Straightforward re-derivation of every feature with explicit index loops,
/// in `Feature::ALL` order.
pub fn reference(x: &[f64]) -> [f64; 23] {
    let t = x.len();
    let tf = t as f64;
    let mut total = 0.0;
    for i in 0..t {
        total += x[i];
    }
    let constant = x.iter().all(|&v| v == x[0]);
    let mu = if constant { x[0] } else { total / tf };
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for i in 0..t {
        let d = x[i] - mu;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    let sd = if constant { 0.0 } else { (s2 / tf).sqrt() };
    let skew = if sd == 0.0 { 0.0 } else { (s3 / tf) / (sd * sd * sd) };
    let kurt = if sd == 0.0 { 0.0 } else { (s4 / tf) / (sd * sd * sd * sd) - 3.0 };

    let mut sorted = x.to_vec();
    for i in 1..t {
        let mut j = i;
        while j > 0 && sorted[j - 1] > sorted[j] {
            sorted.swap(j - 1, j);
            j -= 1;
        }
    }
    let q = |p: f64| {
        let pos = p * (tf - 1.0);
        let below = pos as usize;
        let frac = pos - below as f64;
        if below + 1 < t {
            sorted[below] * (1.0 - frac) + sorted[below + 1] * frac
        } else {
            sorted[below]
        }
    };
    let (q25, q50, q75) = (q(0.25), q(0.5), q(0.75));

    // OLS on t = 1..T with Σ(t − t̄)² = T(T² − 1)/12
    let t_bar = (tf + 1.0) / 2.0;
    let x_bar = total / tf;
    let mut sxy = 0.0;
    for i in 0..t {
        sxy += ((i + 1) as f64 - t_bar) * (x[i] - x_bar);
    }
    let slope = sxy / (tf * (tf * tf - 1.0) / 12.0);
    let intercept = x_bar - slope * t_bar;
    let b = t / 3;
    let (mut past, mut recent) = (0.0, 0.0);
    for i in 0..b {
        past += x[i];
        recent += x[t - b + i];
    }
    past /= b as f64;
    recent /= b as f64;

    let (mut dsum, mut dabs) = (0.0, 0.0);
    for i in 1..t {
        dsum += x[i] - x[i - 1];
        dabs += (x[i] - x[i - 1]).abs();
    }
    let rolling = |w: usize| {
        let mut acc = 0.0;
        let mut count = 0;
        for end in w..=t {
            let win = &x[end - w..end];
            let flat = win.iter().all(|&v| v == win[0]);
            let m = win.iter().sum::<f64>() / w as f64;
            let var = win.iter().map(|v| (v - m).powi(2)).sum::<f64>() / w as f64;
            acc += if flat { 0.0 } else { var.sqrt() };
            count += 1;
        }
        acc / count as f64
    };
    let (mut dd_max, mut dd_sum, mut peak) = (0.0f64, 0.0, x[0]);
    for &v in x {
        if v > peak {
            peak = v;
        }
        let dd = (peak - v) / (peak + EPS);
        dd_max = dd_max.max(dd);
        dd_sum += dd;
    }
    [
        mu,
        sd,
        q25,
        q50,
        q75,
        q75 - q25,
        sorted[0],
        sorted[t - 1],
        skew,
        kurt,
        sd / (mu.abs() + EPS),
        slope,
        intercept,
        recent / (past + EPS),
        recent - past,
        (x[t - 1] - x[t - 8]) / 7.0,
        dsum / (tf - 1.0),
        dabs / (tf - 1.0),
        rolling(7),
        rolling(14),
        rolling(30),
        dd_max,
        dd_sum / tf,
    ]
}
