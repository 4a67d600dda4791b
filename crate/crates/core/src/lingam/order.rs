//! Matching demixing rows to variables and reading off a causal order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ica::IcaResult;

/// How rows of `Ŵ` are assigned to variables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// Maximize `Σ |Ŵ[perm(i), i]|`.
    #[default]
    AbsSum,
    /// Maximize `Σ log |Ŵ[perm(i), i]|`, which ignores row scaling.
    LogAbs,
}

/// How the ratio `r_i = ‖w_i‖ / max_j |w_ij|` turns into an order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRule {
    /// Repeatedly take the variable with the smallest ratio computed over the
    /// columns of the variables not yet ordered.
    #[default]
    Sequential,
    /// Sort once by the ratio over all columns.
    SinglePass,
}

/// Minimum-cost perfect assignment on a square matrix; `result[row] = col`.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "square cost matrix");
    // Potentials-based Hungarian method, 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Rows of `Ŵ` permuted so row `i` belongs to variable `i`, each flipped to
/// a positive diagonal.
pub fn match_rows(demixing: &DMatrix<f64>, rule: MatchRule) -> DMatrix<f64> {
    let v = demixing.nrows();
    let cost = DMatrix::from_fn(v, v, |r, c| {
        let a = demixing[(r, c)].abs();
        match rule {
            MatchRule::AbsSum => -a,
            MatchRule::LogAbs => -a.max(1e-300).ln(),
        }
    });
    let assignment = min_cost_assignment(&cost);
    let mut matched = DMatrix::zeros(v, v);
    for (row, &var) in assignment.iter().enumerate() {
        let sign = if demixing[(row, var)] < 0.0 { -1.0 } else { 1.0 };
        matched.set_row(var, &(demixing.row(row) * sign));
    }
    matched
}

fn ratio(w: &DMatrix<f64>, i: usize, cols: &[usize]) -> f64 {
    let (mut sq, mut mx) = (0.0f64, 0.0f64);
    for &j in cols {
        let a = w[(i, j)].abs();
        sq += a * a;
        mx = mx.max(a);
    }
    if mx == 0.0 {
        f64::INFINITY
    } else {
        sq.sqrt() / mx
    }
}

/// Orders variables from a matched demixing matrix; ties go to the lower
/// index.
pub fn order_from_matched(matched: &DMatrix<f64>, rule: OrderRule) -> Vec<usize> {
    let v = matched.nrows();
    let all: Vec<usize> = (0..v).collect();
    match rule {
        OrderRule::SinglePass => {
            let r: Vec<f64> = (0..v).map(|i| ratio(matched, i, &all)).collect();
            let mut order = all;
            order.sort_by(|&a, &b| r[a].total_cmp(&r[b]).then(a.cmp(&b)));
            order
        }
        OrderRule::Sequential => {
            let mut remaining = all;
            let mut order = Vec::with_capacity(v);
            while !remaining.is_empty() {
                let mut best = 0;
                let mut best_r = f64::INFINITY;
                for (pos, &i) in remaining.iter().enumerate() {
                    let r = ratio(matched, i, &remaining);
                    if r < best_r {
                        best_r = r;
                        best = pos;
                    }
                }
                order.push(remaining.remove(best));
            }
            order
        }
    }
}

pub fn causal_order(ica: &IcaResult, match_rule: MatchRule, order_rule: OrderRule) -> Vec<usize> {
    order_from_matched(&match_rows(&ica.demixing, match_rule), order_rule)
}
