//! Symmetric FastICA with the log-cosh contrast.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::StandardizedData;
use crate::error::LingamError;

/// Absolute correlation above which two columns count as collinear.
pub const COLLINEAR_THRESHOLD: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcaConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct IcaResult {
    /// `Â`, columns are the mixing weights of each source.
    pub mixing: DMatrix<f64>,
    /// `Ŵ = Â⁻¹`, rows recover the sources from the standardized data.
    pub demixing: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `(W Wᵀ)^{-1/2} W`
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = (w * w.transpose()).symmetric_eigen();
    let inv_sqrt =
        DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&s| 1.0 / s.max(1e-300).sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose() * w
}

/// Column covariance of centered data with divisor `n`.
pub(crate) fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose() * x / x.nrows() as f64
}

/// Errors on the first pair of columns whose absolute correlation exceeds
/// [`COLLINEAR_THRESHOLD`].
pub(crate) fn check_collinear(cov: &DMatrix<f64>, names: &[String]) -> Result<(), LingamError> {
    let v = cov.nrows();
    for i in 0..v {
        for j in i + 1..v {
            let corr = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
            if corr.abs() > COLLINEAR_THRESHOLD {
                return Err(LingamError::Collinear { a: names[i].clone(), b: names[j].clone(), corr: corr.abs() });
            }
        }
    }
    Ok(())
}

/// Estimates the demixing matrix of standardized data.
///
/// The data are whitened through the eigendecomposition of their
/// covariance; the initial rotation is a standard normal matrix drawn from
/// `ChaCha8Rng::seed_from_u64(seed)`.
pub fn fast_ica(x: &StandardizedData, config: &IcaConfig, seed: u64) -> Result<IcaResult, LingamError> {
    let (n, v) = x.data.shape();
    if n <= v {
        return Err(LingamError::TooFewRows { rows: n, min: v });
    }
    let cov = covariance(&x.data);
    check_collinear(&cov, &x.names)?;
    let eig = cov.symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-12 * max_ev) {
        return Err(LingamError::SingularCovariance);
    }
    let scale = DVector::from_iterator(v, eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let whitening = DMatrix::from_diagonal(&scale) * eig.eigenvectors.transpose();
    let z = &x.data * whitening.transpose();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = DMatrix::from_fn(v, v, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut w = symmetric_decorrelation(&w0);
    let mut converged = false;
    let mut iterations = 0;
    let nf = n as f64;
    while iterations < config.max_iter {
        iterations += 1;
        let mut g = &z * w.transpose();
        let mut g_prime = DVector::zeros(v);
        for c in 0..v {
            let mut acc = 0.0;
            for r in 0..n {
                let t = g[(r, c)].tanh();
                g[(r, c)] = t;
                acc += 1.0 - t * t;
            }
            g_prime[c] = acc / nf;
        }
        let mut w1 = g.transpose() * &z / nf;
        for i in 0..v {
            for j in 0..v {
                w1[(i, j)] -= g_prime[i] * w[(i, j)];
            }
        }
        let w1 = symmetric_decorrelation(&w1);
        let lim = (0..v).map(|i| (w1.row(i).dot(&w.row(i)).abs() - 1.0).abs()).fold(0.0, f64::max);
        w = w1;
        if lim < config.tol {
            converged = true;
            break;
        }
    }
    let demixing = w * whitening;
    let mixing = demixing.clone().try_inverse().ok_or(LingamError::SingularCovariance)?;
    Ok(IcaResult { mixing, demixing, iterations, converged })
}
