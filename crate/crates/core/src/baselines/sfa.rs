use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chi2_quantile, pixel_matrix, weighted_moments, ScoreMap};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, solve_lower_transposed, symmetric_eigen, whiten_symmetric, Matrix};
use crate::raster::{ChangeMask, ImagePair};

/// Eigenvalues at or below this are treated as invariant directions and skipped.
const MIN_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfaParams {
    pub ridge: f64,
    pub confidence: f64,
}

impl Default for SfaParams {
    fn default() -> Self {
        Self {
            ridge: 1e-8,
            confidence: 0.99,
        }
    }
}

/// Solution of `Σ_Δ w = λ Σ̄ w` on standardized bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfaModel {
    /// Covariance of the standardized difference.
    pub sigma_delta: Matrix,
    /// Mean of the two standardized covariances, without the ridge.
    pub sigma_bar: Matrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[j]` pairs with `eigenvalues[j]`, normalized so that
    /// `wᵀ (Σ̄ + ridge I) w = 1`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Indices of eigenpairs used in the score.
    pub retained: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfaResult {
    pub scores: ScoreMap,
    pub mask: ChangeMask,
    /// `None` when no eigenpair was retained (no change signal at all).
    pub threshold: Option<f64>,
    pub model: SfaModel,
}

/// Subtracts the band mean and divides by the band standard deviation.
/// Constant bands are only centered.
fn standardize(x: &mut Matrix) {
    let n = x.rows() as f64;
    for c in 0..x.cols() {
        let col = x.column(c);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in 0..x.rows() {
            let v = x[(r, c)];
            x.row_mut(r)[c] = (v - mean) / sd;
        }
    }
}

/// Slow feature analysis change detection.
pub fn sfa_baseline(pair: &ImagePair, params: &SfaParams) -> Result<SfaResult> {
    let mut x = pixel_matrix(pair.pre());
    let mut y = pixel_matrix(pair.post());
    standardize(&mut x);
    standardize(&mut y);
    let (n, b) = (x.rows(), x.cols());
    let delta = Matrix::from_fn(n, b, |r, c| x[(r, c)] - y[(r, c)]);
    let ones = vec![1.0; n];

    // Second moments about the mean; after standardization the means are ~0.
    let mxy = weighted_moments(&x, &y, &ones);
    let md = weighted_moments(&delta, &delta, &ones);
    let sigma_delta = md.cov_aa;
    let sigma_bar = mxy.cov_aa.add(&mxy.cov_bb).scale(0.5);

    let mut regularized = sigma_bar.clone();
    regularized.add_diagonal(params.ridge);
    let l = cholesky(&regularized).ok_or(Error::SingularCovariance)?;
    let eig = symmetric_eigen(&whiten_symmetric(&l, &sigma_delta));
    let eigenvectors: Vec<Vec<f64>> = (0..b)
        .map(|j| {
            let mut w = solve_lower_transposed(&l, &eig.vectors.column(j));
            let pivot = (0..b).fold(0, |p, i| if w[i].abs() > w[p].abs() { i } else { p });
            if w[pivot] < 0.0 {
                w.iter_mut().for_each(|v| *v = -*v);
            }
            w
        })
        .collect();
    let retained: Vec<usize> = (0..b).filter(|&j| eig.values[j] > MIN_EIGENVALUE).collect();

    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            retained
                .iter()
                .map(|&j| dot(&eigenvectors[j], delta.row(i)).powi(2) / eig.values[j])
                .sum()
        })
        .collect();
    let scores = ScoreMap::new(pair.width(), pair.height(), scores)?;
    let threshold = if retained.is_empty() {
        None
    } else {
        Some(chi2_quantile(retained.len(), params.confidence)?)
    };
    let mask = match threshold {
        Some(t) => scores.threshold(|v| v > t),
        None => ChangeMask::zeros(pair.width(), pair.height()),
    };
    Ok(SfaResult {
        scores,
        mask,
        threshold,
        model: SfaModel {
            sigma_delta,
            sigma_bar,
            eigenvalues: eig.values,
            eigenvectors,
            retained,
        },
    })
}
