//! Statistical, trend and variability features of a daily window.
//!
//! All 23 features are always computed; a configurable active subset is
//! exported. The default active set drops `diff_mean`, leaving 22.
//!
//! Conventions: population moments (divisor `T`), excess kurtosis,
//! quantiles by linear interpolation between order statistics at
//! `h = (T − 1)q`, trend regressors `t = 1..=T`, trailing rolling windows
//! over valid positions only, and `ε = 1e−10` in every ratio guard.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CovariateSeries;
use crate::error::FeatureError;

pub const EPS: f64 = 1e-10;
pub const DEFAULT_WINDOW: usize = 90;
/// Shortest window for which every feature is defined.
pub const MIN_WINDOW: usize = 31;
pub const ROLLING_WINDOWS: [usize; 3] = [7, 14, 30];

macro_rules! features {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// One named feature.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Feature { $($variant),+ }

        impl Feature {
            pub const ALL: [Feature; 23] = [$(Feature::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $(Feature::$variant => $name),+ }
            }
        }
    };
}

features! {
    Mean => "mean",
    Std => "std",
    Q25 => "q25",
    Q50 => "q50",
    Q75 => "q75",
    Iqr => "iqr",
    Min => "min",
    Max => "max",
    Skewness => "skewness",
    Kurtosis => "kurtosis",
    Cv => "cv",
    TrendSlope90d => "trend_slope_90d",
    TrendIntercept => "trend_intercept",
    RecentVsPastRatio => "recent_vs_past_ratio",
    RecentVsPastDiff => "recent_vs_past_diff",
    RecentChangeRate => "recent_change_rate",
    DiffMean => "diff_mean",
    DiffAbsMean => "diff_abs_mean",
    RollingStd7dMean => "rolling_std_7d_mean",
    RollingStd14dMean => "rolling_std_14d_mean",
    RollingStd30dMean => "rolling_std_30d_mean",
    MaxDrawdown => "max_drawdown",
    MeanDrawdown => "mean_drawdown",
}

impl Feature {
    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| FeatureError::UnknownFeature(s.to_string()))
    }
}

/// The default exported features: every feature except `diff_mean`.
pub fn default_active() -> Vec<Feature> {
    Feature::ALL.into_iter().filter(|&f| f != Feature::DiffMean).collect()
}

pub fn parse_active(names: &[String]) -> Result<Vec<Feature>, FeatureError> {
    names.iter().map(|n| n.parse()).collect()
}

/// All 23 feature values, indexed by [`Feature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector([f64; 23]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    pub fn values(&self) -> &[f64; 23] {
        &self.0
    }

    pub fn select(&self, active: &[Feature]) -> Vec<f64> {
        active.iter().map(|&f| self.get(f)).collect()
    }
}

fn check_window(w: &[f64], min: usize) -> Result<(), FeatureError> {
    if w.len() < min {
        return Err(FeatureError::WindowTooShort { len: w.len(), min });
    }
    match w.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(FeatureError::NonFinite { index }),
        None => Ok(()),
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation; exactly zero for a constant slice.
fn pop_std(x: &[f64]) -> f64 {
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The eleven distributional features, in [`Feature::ALL`] order from `mean`
/// through `cv`.
pub fn statistical_features(w: &[f64]) -> Result<[f64; 11], FeatureError> {
    check_window(w, 2)?;
    let n = w.len() as f64;
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mu = if min == max { min } else { mean(w) };
    let sigma = pop_std(w);
    let (skew, kurt) = if sigma == 0.0 {
        (0.0, 0.0)
    } else {
        let m3 = w.iter().map(|v| (v - mu).powi(3)).sum::<f64>() / n;
        let m4 = w.iter().map(|v| (v - mu).powi(4)).sum::<f64>() / n;
        (m3 / sigma.powi(3), m4 / sigma.powi(4) - 3.0)
    };
    let (q25, q50, q75) =
        (quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.5), quantile_sorted(&sorted, 0.75));
    Ok([mu, sigma, q25, q50, q75, q75 - q25, min, max, skew, kurt, sigma / (mu.abs() + EPS)])
}

/// Slope, intercept, recent-vs-past ratio and difference, and the 7-day
/// change rate at the end of the window.
///
/// The recent and past blocks are the last and first `⌊T/3⌋` days.
pub fn trend_features(w: &[f64]) -> Result<[f64; 5], FeatureError> {
    check_window(w, 8)?;
    let t_len = w.len();
    let t_bar = (t_len as f64 + 1.0) / 2.0;
    let x_bar = mean(w);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (idx, &x) in w.iter().enumerate() {
        let dt = (idx + 1) as f64 - t_bar;
        sxy += dt * (x - x_bar);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let intercept = x_bar - slope * t_bar;
    let block = t_len / 3;
    let past = mean(&w[..block]);
    let recent = mean(&w[t_len - block..]);
    let change = (w[t_len - 1] - w[t_len - 8]) / 7.0;
    Ok([slope, intercept, recent / (past + EPS), recent - past, change])
}

/// Mean and mean absolute first difference, mean trailing rolling std for
/// each of [`ROLLING_WINDOWS`], and maximum and mean drawdown.
pub fn variability_features(w: &[f64]) -> Result<[f64; 7], FeatureError> {
    check_window(w, MIN_WINDOW)?;
    let n_diff = (w.len() - 1) as f64;
    let (mut d_sum, mut d_abs) = (0.0, 0.0);
    for pair in w.windows(2) {
        let d = pair[1] - pair[0];
        d_sum += d;
        d_abs += d.abs();
    }
    let rolling = ROLLING_WINDOWS.map(|width| {
        let stds: Vec<f64> = w.windows(width).map(pop_std).collect();
        mean(&stds)
    });
    let mut running_max = f64::NEG_INFINITY;
    let (mut dd_max, mut dd_sum) = (0.0f64, 0.0);
    for &x in w {
        running_max = running_max.max(x);
        let dd = (running_max - x) / (running_max + EPS);
        dd_max = dd_max.max(dd);
        dd_sum += dd;
    }
    Ok([d_sum / n_diff, d_abs / n_diff, rolling[0], rolling[1], rolling[2], dd_max, dd_sum / w.len() as f64])
}

/// Every feature of one window of at least [`MIN_WINDOW`] values.
pub fn compute_features(w: &[f64]) -> Result<FeatureVector, FeatureError> {
    check_window(w, MIN_WINDOW)?;
    let mut v = [0.0; 23];
    v[..11].copy_from_slice(&statistical_features(w)?);
    v[11..16].copy_from_slice(&trend_features(w)?);
    v[16..].copy_from_slice(&variability_features(w)?);
    Ok(FeatureVector(v))
}

/// Rows of active feature values, one per pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub pump_ids: Vec<String>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(std::iter::once("pump_id").chain(self.names.iter().map(String::as_str)))?;
        for (id, row) in self.pump_ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("pump_id") {
            return Err(FeatureError::Format("first column must be pump_id".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let (mut pump_ids, mut rows) = (Vec::new(), Vec::new());
        for (idx, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| FeatureError::Format(format!("row {}: {e}", idx + 1)))?;
            pump_ids.push(rec[0].to_string());
            rows.push(row);
        }
        Ok(Self { pump_ids, names, rows })
    }
}

/// Features of the `window` days ending at `window_end` (inclusive) for
/// every series, in input order.
pub fn extract_features(
    series: &[CovariateSeries],
    window_end: u32,
    window: usize,
    active: &[Feature],
) -> Result<FeatureMatrix, FeatureError> {
    let end = window_end + 1;
    let start = end.checked_sub(window as u32);
    let rows = series
        .par_iter()
        .map(|s| {
            let w = start.and_then(|st| s.span(st, end)).ok_or_else(|| FeatureError::InsufficientSeries {
                pump_id: s.pump_id.clone(),
                first: s.first_day,
                last: s.last_day().unwrap_or(s.first_day),
                start: start.unwrap_or(0),
                end: window_end,
            })?;
            Ok(compute_features(w)?.select(active))
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    Ok(FeatureMatrix {
        pump_ids: series.iter().map(|s| s.pump_id.clone()).collect(),
        names: active.iter().map(|f| f.name().to_string()).collect(),
        rows,
    })
}
