//! ICA-based LiNGAM: standardize, decompose, order, regress, bootstrap.
//!
//! The model is `x = Bᵀx + e` with independent non-Gaussian `e`; here
//! `adjacency[i][j]` is the direct effect of variable `i` on variable `j`.
//! Effects are estimated on standardized columns and can be mapped back to
//! raw units with `b_raw[i][j] = b[i][j]·σ_j/σ_i`.

mod bootstrap;
mod ica;
mod order;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::LingamError;
use crate::grouping::GroupDataset;

pub use bootstrap::{bootstrap_cis, BootstrapSummary};
pub use ica::{fast_ica, IcaConfig, IcaResult, COLLINEAR_THRESHOLD};
pub use order::{causal_order, match_rows, min_cost_assignment, order_from_matched, MatchRule, OrderRule};

/// Name given to the target column appended to the features.
pub const TARGET_NAME: &str = "u";

/// Centered, unit-variance columns (population variance) with the moments
/// needed to undo the scaling.
#[derive(Debug, Clone)]
pub struct StandardizedData {
    pub data: DMatrix<f64>,
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

pub fn standardize(raw: &DMatrix<f64>, names: &[String]) -> Result<StandardizedData, LingamError> {
    let (n, v) = raw.shape();
    if names.len() != v {
        return Err(LingamError::Shape(format!("{} names for {v} columns", names.len())));
    }
    if n < 2 {
        return Err(LingamError::TooFewRows { rows: n, min: 1 });
    }
    let mut data = raw.clone();
    let mut means = Vec::with_capacity(v);
    let mut sds = Vec::with_capacity(v);
    for (j, name) in names.iter().enumerate() {
        let mut col = data.column_mut(j);
        if col.iter().any(|x| !x.is_finite()) {
            return Err(LingamError::NonFinite(name.clone()));
        }
        let m = col.mean();
        col.add_scalar_mut(-m);
        let sd = (col.norm_squared() / n as f64).sqrt();
        if !(sd > 0.0) || col.iter().all(|&x| x == col[0]) {
            return Err(LingamError::ConstantColumn(name.clone()));
        }
        col /= sd;
        // second pass removes rounding left by the first
        let m2 = col.mean();
        col.add_scalar_mut(-m2);
        means.push(m + m2 * sd);
        sds.push(sd);
    }
    Ok(StandardizedData { data, names: names.to_vec(), means, sds })
}

/// Solves `A x = b` for symmetric positive semi-definite `A`, falling back
/// to the minimum-norm solution when `A` is singular.
fn solve_psd(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    log::warn!("rank-deficient predecessor block, using the minimum-norm solution");
    let eig = a.clone().symmetric_eigen();
    let cutoff = 1e-10 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let inv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| if l > cutoff { 1.0 / l } else { 0.0 }),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose() * b
}

/// OLS of each variable on all of its predecessors in `order`.
pub fn estimate_effects(x: &StandardizedData, order: &[usize]) -> DMatrix<f64> {
    let v = x.data.ncols();
    assert_eq!(order.len(), v, "order covers every variable");
    let cov = ica::covariance(&x.data);
    let mut b = DMatrix::zeros(v, v);
    for (k, &j) in order.iter().enumerate().skip(1) {
        let preds = &order[..k];
        let a = DMatrix::from_fn(k, k, |r, c| cov[(preds[r], preds[c])]);
        let rhs = DVector::from_fn(k, |r, _| cov[(preds[r], j)]);
        let coef = solve_psd(&a, &rhs);
        for (r, &i) in preds.iter().enumerate() {
            b[(i, j)] = coef[r];
        }
    }
    b
}

/// Rescales standardized effects to raw units.
pub fn destandardize(b: &DMatrix<f64>, sds: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * sds[j] / sds[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LingamConfig {
    pub ica: IcaConfig,
    pub n_bootstrap: usize,
    pub match_rule: MatchRule,
    pub order_rule: OrderRule,
    pub seed: u64,
}

impl Default for LingamConfig {
    fn default() -> Self {
        Self {
            ica: IcaConfig::default(),
            n_bootstrap: 1000,
            match_rule: MatchRule::default(),
            order_rule: OrderRule::default(),
            seed: 0,
        }
    }
}

/// One pass of standardize, ICA, order and regression.
#[derive(Debug, Clone)]
pub struct Fit {
    pub standardized: StandardizedData,
    pub ica: IcaResult,
    pub order: Vec<usize>,
    pub adjacency: DMatrix<f64>,
}

pub fn fit(raw: &DMatrix<f64>, names: &[String], config: &LingamConfig, seed: u64) -> Result<Fit, LingamError> {
    let standardized = standardize(raw, names)?;
    let ica = fast_ica(&standardized, &config.ica, seed)?;
    let order = causal_order(&ica, config.match_rule, config.order_rule);
    let adjacency = estimate_effects(&standardized, &order);
    Ok(Fit { standardized, ica, order, adjacency })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalModel {
    pub names: Vec<String>,
    pub order: Vec<usize>,
    /// Standardized effects, `adjacency[i][j]` for `i → j`.
    pub adjacency: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub target: usize,
    pub ica_converged: bool,
    pub ica_iterations: usize,
    /// Constant columns removed before the analysis.
    pub dropped: Vec<String>,
    pub bootstrap: Option<BootstrapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEffect {
    pub feature: String,
    pub effect: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub sign_stability: Option<f64>,
    pub effect_raw: f64,
    pub ci_low_raw: Option<f64>,
    pub ci_high_raw: Option<f64>,
}

impl TargetEffect {
    pub fn ci_contains_zero(&self) -> Option<bool> {
        Some(self.ci_low? <= 0.0 && self.ci_high? >= 0.0)
    }

    pub fn ci_raw_contains_zero(&self) -> Option<bool> {
        Some(self.ci_low_raw? <= 0.0 && self.ci_high_raw? >= 0.0)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CausalModel {
    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn effect(&self, from: usize, to: usize) -> f64 {
        self.adjacency[from][to]
    }

    pub fn effect_raw(&self, from: usize, to: usize) -> f64 {
        self.adjacency[from][to] * self.sds[to] / self.sds[from]
    }

    pub fn order_names(&self) -> Vec<String> {
        self.order.iter().map(|&i| self.names[i].clone()).collect()
    }

    /// Direct effects of every feature on the target, largest `|effect|`
    /// first.
    pub fn effects_to_target(&self) -> Vec<TargetEffect> {
        let t = self.target;
        let mut out: Vec<TargetEffect> = (0..self.n_vars())
            .filter(|&i| i != t)
            .map(|i| {
                let bs = self.bootstrap.as_ref();
                TargetEffect {
                    feature: self.names[i].clone(),
                    effect: self.effect(i, t),
                    ci_low: bs.map(|b| b.ci_low[i][t]),
                    ci_high: bs.map(|b| b.ci_high[i][t]),
                    sign_stability: bs.map(|b| b.sign_stability[i][t]),
                    effect_raw: self.effect_raw(i, t),
                    ci_low_raw: bs.map(|b| b.ci_low_raw[i][t]),
                    ci_high_raw: bs.map(|b| b.ci_high_raw[i][t]),
                }
            })
            .collect();
        out.sort_by(|a, b| b.effect.abs().total_cmp(&a.effect.abs()).then_with(|| a.feature.cmp(&b.feature)));
        out
    }

    /// One row per ordered pair: `from,to,effect,ci_low,ci_high,sign_stability`.
    pub fn write_adjacency_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["from", "to", "effect", "ci_low", "ci_high", "sign_stability"])?;
        let bs = self.bootstrap.as_ref();
        for i in 0..self.n_vars() {
            for j in 0..self.n_vars() {
                w.write_record([
                    self.names[i].clone(),
                    self.names[j].clone(),
                    self.effect(i, j).to_string(),
                    fmt_opt(bs.map(|b| b.ci_low[i][j])),
                    fmt_opt(bs.map(|b| b.ci_high[i][j])),
                    fmt_opt(bs.map(|b| b.sign_stability[i][j])),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_effects_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "feature",
            "effect",
            "ci_low",
            "ci_high",
            "sign_stability",
            "effect_raw",
            "ci_low_raw",
            "ci_high_raw",
        ])?;
        for e in self.effects_to_target() {
            w.write_record([
                e.feature.clone(),
                e.effect.to_string(),
                fmt_opt(e.ci_low),
                fmt_opt(e.ci_high),
                fmt_opt(e.sign_stability),
                e.effect_raw.to_string(),
                fmt_opt(e.ci_low_raw),
                fmt_opt(e.ci_high_raw),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_order_json<W: Write>(&self, writer: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(writer, &self.order_names())
    }
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs the full analysis on one group, with the target appended as the
/// last variable.
pub fn discover(group: &GroupDataset, config: &LingamConfig) -> Result<CausalModel, LingamError> {
    let n = group.len();
    let d = group.feature_names.len();
    if group.features.iter().any(|r| r.len() != d) {
        return Err(LingamError::Shape("feature rows differ in length".into()));
    }
    let full = DMatrix::from_fn(n, d + 1, |r, c| if c < d { group.features[r][c] } else { group.target[r] });
    if full.column(d).iter().all(|&u| Some(u) == group.target.first().copied()) {
        return Err(LingamError::ConstantTarget(TARGET_NAME.into()));
    }
    let mut keep = Vec::with_capacity(d + 1);
    let mut dropped = Vec::new();
    for j in 0..d {
        let col = full.column(j);
        if col.iter().all(|&x| x == col[0]) {
            log::warn!("{} group: dropping constant column {}", group.group, group.feature_names[j]);
            dropped.push(group.feature_names[j].clone());
        } else {
            keep.push(j);
        }
    }
    keep.push(d);
    let raw = full.select_columns(&keep);
    let names: Vec<String> =
        keep.iter().map(|&j| if j == d { TARGET_NAME.to_string() } else { group.feature_names[j].clone() }).collect();
    discover_matrix(&raw, &names, names.len() - 1, dropped, config)
}

/// Runs the full analysis on a raw data matrix.
pub fn discover_matrix(
    raw: &DMatrix<f64>,
    names: &[String],
    target: usize,
    dropped: Vec<String>,
    config: &LingamConfig,
) -> Result<CausalModel, LingamError> {
    let v = raw.ncols();
    if raw.nrows() <= v {
        return Err(LingamError::TooFewRows { rows: raw.nrows(), min: v });
    }
    let main = fit(raw, names, config, config.seed)?;
    if !main.ica.converged {
        log::warn!("ICA did not converge in {} iterations; the causal order is unreliable", main.ica.iterations);
    }
    let bootstrap = (config.n_bootstrap > 0).then(|| bootstrap_cis(raw, names, config.n_bootstrap, config));
    Ok(CausalModel {
        names: names.to_vec(),
        order: main.order,
        adjacency: to_rows(&main.adjacency),
        means: main.standardized.means,
        sds: main.standardized.sds,
        target,
        ica_converged: main.ica.converged,
        ica_iterations: main.ica.iterations,
        dropped,
        bootstrap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(v: usize) -> Vec<String> {
        (0..v).map(|i| format!("x{i}")).collect()
    }

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(-1.0..1.0)
    }

    #[test]
    fn standardized_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = DMatrix::from_fn(500, 3, |_, c| 10.0 + (c as f64 + 1.0) * 7.0 * uniform(&mut rng));
        let s = standardize(&raw, &names(3)).unwrap();
        for j in 0..3 {
            let col = s.data.column(j);
            assert!(col.mean().abs() < 1e-10);
            assert!(((col.norm_squared() / 500.0).sqrt() - 1.0).abs() < 1e-10);
            let back = col[0] * s.sds[j] + s.means[j];
            assert!((back - raw[(0, j)]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_and_non_finite_columns_error() {
        let raw = DMatrix::from_fn(10, 2, |r, c| if c == 0 { 1.0 } else { r as f64 });
        assert!(matches!(standardize(&raw, &names(2)), Err(LingamError::ConstantColumn(n)) if n == "x0"));
        let mut raw = DMatrix::from_fn(10, 2, |r, c| (r * (c + 1)) as f64 + c as f64 * (r % 3) as f64);
        raw[(3, 1)] = f64::NAN;
        assert!(matches!(standardize(&raw, &names(2)), Err(LingamError::NonFinite(_))));
    }

    #[test]
    fn collinear_pair_is_named() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = DMatrix::from_fn(100, 3, |_, _| uniform(&mut rng));
        let mut raw = raw.insert_column(3, 0.0);
        for r in 0..100 {
            raw[(r, 3)] = 2.0 * raw[(r, 1)] + 1.0;
        }
        let s = standardize(&raw, &names(4)).unwrap();
        match fast_ica(&s, &IcaConfig::default(), 0) {
            Err(LingamError::Collinear { a, b, .. }) => assert_eq!((a.as_str(), b.as_str()), ("x1", "x3")),
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn demixing_inverts_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = DMatrix::from_fn(2000, 3, |_, _| uniform(&mut rng));
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.3, 1.0, 0.2, 0.0, 0.4, 1.0]);
        let x = s * a.transpose();
        let st = standardize(&x, &names(3)).unwrap();
        let ica = fast_ica(&st, &IcaConfig::default(), 7).unwrap();
        assert!(ica.converged);
        let prod = &ica.demixing * &ica.mixing;
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-6);
    }

    #[test]
    fn two_variable_effect_and_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut raw = DMatrix::zeros(2000, 2);
        for r in 0..2000 {
            let x1 = uniform(&mut rng);
            raw[(r, 0)] = x1;
            raw[(r, 1)] = 0.8 * x1 + uniform(&mut rng);
        }
        let st = standardize(&raw, &names(2)).unwrap();
        let b = estimate_effects(&st, &[0, 1]);
        let raw_b = destandardize(&b, &st.sds);
        assert!((raw_b[(0, 1)] - 0.8).abs() < 0.03);
        assert_eq!(b[(1, 0)], 0.0);
        assert_eq!(b.column(0).amax(), 0.0);
        let f = fit(&raw, &names(2), &LingamConfig::default(), 0).unwrap();
        assert_eq!(f.order, [0, 1]);
    }

    #[test]
    fn rank_deficient_block_uses_min_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = solve_psd(&a, &DVector::from_vec(vec![2.0, 2.0]));
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn effects_to_target_sorted_and_csv_shaped() {
        let model = CausalModel {
            names: vec!["a".into(), "b".into(), "u".into()],
            order: vec![0, 1, 2],
            adjacency: vec![vec![0.0, 0.1, -0.7], vec![0.0, 0.0, 0.2], vec![0.0; 3]],
            means: vec![0.0; 3],
            sds: vec![1.0, 2.0, 4.0],
            target: 2,
            ica_converged: true,
            ica_iterations: 5,
            dropped: vec![],
            bootstrap: None,
        };
        let e = model.effects_to_target();
        assert_eq!(e[0].feature, "a");
        assert_eq!(e[0].effect_raw, -2.8);
        assert_eq!(e[1].effect_raw, 0.4);
        let mut buf = Vec::new();
        model.write_adjacency_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("from,to,effect,ci_low,ci_high,sign_stability\n"));
        assert_eq!(text.lines().count(), 1 + 9);
        let mut buf = Vec::new();
        model.write_order_json(&mut buf).unwrap();
        let order: Vec<String> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(order, ["a", "b", "u"]);
    }
}
