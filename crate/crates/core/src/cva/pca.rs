use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, svd_jacobi, svd_randomized, Matrix};

/// Inputs whose smaller side exceeds this use the randomized solver.
const EXACT_SVD_LIMIT: usize = 256;
const RANDOMIZED_SEED: u64 = 0x5_eed0_f9ca;

/// Fitted principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One unit-norm component per entry; the largest-magnitude coordinate of
    /// each component is positive.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (`n - 1` denominator) along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// Projects every row of `x` onto the components.
    pub fn transform(&self, x: &Matrix) -> Matrix {
        let c = self.components.len();
        let mut out = Matrix::zeros(x.rows(), c);
        let mut centered = vec![0.0; self.mean.len()];
        for r in 0..x.rows() {
            for ((dst, &v), &m) in centered.iter_mut().zip(x.row(r)).zip(&self.mean) {
                *dst = v - m;
            }
            for (j, comp) in self.components.iter().enumerate() {
                out[(r, j)] = dot(&centered, comp);
            }
        }
        out
    }
}

/// Centers `x` by column means and takes the top `components` right singular
/// vectors of the centered matrix.
pub fn pca_fit(x: &Matrix, components: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 || components == 0 || components > n.min(d) {
        return Err(Error::InvalidComponentCount {
            requested: components,
            rows: n,
            cols: d,
        });
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut centered = x.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let sum_sq: f64 = centered.as_slice().iter().map(|v| v * v).sum();
    let scale = x.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    // Rounding residue from centering a constant column is ~1e-16 * scale.
    if scale == 0.0 || sum_sq <= (n * d) as f64 * (1e-12 * scale).powi(2) {
        return Err(Error::DegenerateData);
    }

    let svd = if n.min(d) <= EXACT_SVD_LIMIT {
        svd_jacobi(&centered, components)
    } else {
        svd_randomized(&centered, components, RANDOMIZED_SEED)
    };

    let components_vecs = svd
        .right
        .into_iter()
        .map(|mut v| {
            let pivot = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bv), (i, &x)| {
                    if x.abs() > bv {
                        (i, x.abs())
                    } else {
                        (bi, bv)
                    }
                })
                .0;
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let denom = (n - 1) as f64;
    Ok(PcaModel {
        mean,
        components: components_vecs,
        explained_variance: svd.values.iter().map(|s| s * s / denom).collect(),
        total_variance: sum_sq / denom,
    })
}

/// Fits on `x` and returns the `n x components` projections alongside the model.
pub fn pca_fit_transform(x: &Matrix, components: usize) -> Result<(PcaModel, Matrix)> {
    let model = pca_fit(x, components)?;
    let proj = model.transform(x);
    Ok((model, proj))
}
