use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chi2_quantile, chi2_survival, pixel_matrix, weighted_moments, ScoreMap};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, solve_lower, solve_lower_transposed, symmetric_eigen, Matrix};
use crate::raster::{ChangeMask, ImagePair};

/// Smallest MAD variance used as a divisor; `2(1 - ρ)` can round to zero or
/// below for exactly affine-related bands.
const MIN_MAD_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrmadParams {
    pub max_iter: usize,
    pub eps: f64,
    pub ridge: f64,
    /// No-change quantile used as the detection threshold.
    pub confidence: f64,
}

impl Default for IrmadParams {
    fn default() -> Self {
        Self {
            max_iter: 30,
            eps: 1e-6,
            ridge: 1e-8,
            confidence: 0.99,
        }
    }
}

/// Weighted canonical correlation analysis.
///
/// Variates are ordered by ascending correlation. `a[j]` and `b[j]` are the
/// coefficient vectors with unit variance under the regularized covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cca {
    pub rho: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
}

fn pivot_positive(u: &mut [f64], v: &mut [f64]) {
    let pivot = (0..u.len()).fold(0, |best, i| if u[i].abs() > u[best].abs() { i } else { best });
    if u[pivot] < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// CCA of the rows of `x` (`n x p`) and `y` (`n x q`) with per-row weights.
pub fn cca(x: &Matrix, y: &Matrix, weights: &[f64], ridge: f64) -> Result<Cca> {
    let m = weighted_moments(x, y, weights);
    let (mut sxx, mut syy) = (m.cov_aa, m.cov_bb);
    sxx.add_diagonal(ridge);
    syy.add_diagonal(ridge);
    let lx = cholesky(&sxx).ok_or(Error::SingularCovariance)?;
    let ly = cholesky(&syy).ok_or(Error::SingularCovariance)?;
    let (p, q) = (x.cols(), y.cols());

    // K = Lx⁻¹ Sxy Ly⁻ᵀ; its singular values are the canonical correlations.
    let mut t = Matrix::zeros(p, q);
    for c in 0..q {
        let col = solve_lower(&lx, &m.cov_ab.column(c));
        for r in 0..p {
            t[(r, c)] = col[r];
        }
    }
    let mut k = Matrix::zeros(p, q);
    for r in 0..p {
        k.row_mut(r).copy_from_slice(&solve_lower(&ly, t.row(r)));
    }
    let kt = k.transpose();
    let left = symmetric_eigen(&k.matmul(&kt));
    let right = symmetric_eigen(&kt.matmul(&k));

    let n = p.min(q);
    let (mut rho, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
    // The top n eigenvalues of KKᵀ are the squared correlations.
    for j in p - n..p {
        let r = left.values[j].max(0.0).sqrt().min(1.0);
        let mut u = left.vectors.column(j);
        let mut v = if r > 1e-12 {
            kt.matvec(&u).iter().map(|x| x / r).collect()
        } else {
            right.vectors.column(q - n + (j - (p - n)))
        };
        pivot_positive(&mut u, &mut v);
        rho.push(r);
        a.push(solve_lower_transposed(&lx, &u));
        b.push(solve_lower_transposed(&ly, &v));
    }
    Ok(Cca {
        rho,
        a,
        b,
        mean_x: m.mean_a,
        mean_y: m.mean_b,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrmadResult {
    /// Per-pixel chi-square statistic `Σ (mad_j / σ_j)²`.
    pub scores: ScoreMap,
    pub mask: ChangeMask,
    pub threshold: f64,
    /// Final no-change weights, each in `[0, 1]`.
    pub weights: Vec<f64>,
    pub cca: Cca,
    /// Canonical correlations after every iteration.
    pub rho_history: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// `max_j |ρ_j(last) - ρ_j(previous)|`; infinite after a single iteration.
    pub final_delta: f64,
}

fn chi_square_stats(x: &Matrix, y: &Matrix, c: &Cca) -> Vec<f64> {
    let var: Vec<f64> = c
        .rho
        .iter()
        .map(|r| (2.0 * (1.0 - r)).max(MIN_MAD_VARIANCE))
        .collect();
    (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let dx: Vec<f64> = x.row(i).iter().zip(&c.mean_x).map(|(v, m)| v - m).collect();
            let dy: Vec<f64> = y.row(i).iter().zip(&c.mean_y).map(|(v, m)| v - m).collect();
            (0..c.rho.len())
                .map(|j| {
                    let mad = dot(&c.a[j], &dx) - dot(&c.b[j], &dy);
                    mad * mad / var[j]
                })
                .sum()
        })
        .collect()
}

/// Iteratively reweighted multivariate alteration detection.
pub fn irmad_baseline(pair: &ImagePair, params: &IrmadParams) -> Result<IrmadResult> {
    let x = pixel_matrix(pair.pre());
    let y = pixel_matrix(pair.post());
    let bands = pair.bands();
    let mut weights = vec![1.0; x.rows()];
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut final_delta = f64::INFINITY;
    let mut last = None;

    for _ in 0..params.max_iter.max(1) {
        let c = cca(&x, &y, &weights, params.ridge)?;
        let z = chi_square_stats(&x, &y, &c);
        weights = z
            .iter()
            .map(|&zi| chi2_survival(bands, zi))
            .collect::<Result<_>>()?;
        if let Some(prev) = history.last() {
            final_delta = c
                .rho
                .iter()
                .zip(prev)
                .map(|(a, b): (&f64, &f64)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        history.push(c.rho.clone());
        last = Some((c, z));
        if final_delta < params.eps {
            converged = true;
            break;
        }
    }

    let (c, z) = last.expect("at least one iteration");
    let threshold = chi2_quantile(bands, params.confidence)?;
    let scores = ScoreMap::new(pair.width(), pair.height(), z)?;
    let mask = scores.threshold(|v| v > threshold);
    Ok(IrmadResult {
        scores,
        mask,
        threshold,
        weights,
        cca: c,
        iterations: history.len(),
        rho_history: history,
        converged,
        final_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterImage;

    fn textured(w: usize, h: usize, bands: usize) -> RasterImage {
        RasterImage::from_fn(w, h, bands, |x, y, b| {
            (((x * 31 + y * 17 + b * 13) % 97) as f32 / 97.0) * 0.4 + 0.05
        })
        .unwrap()
    }

    #[test]
    fn affine_copy_is_unchanged() {
        let pre = textured(32, 32, 3);
        let post = RasterImage::from_fn(32, 32, 3, |x, y, b| 2.0 * pre.get(x, y, b) + 0.1).unwrap();
        let r = irmad_baseline(&ImagePair::new(pre, post).unwrap(), &IrmadParams::default()).unwrap();
        assert_eq!(r.mask.count_changed(), 0);
        assert!(r.converged);
        assert!(r.weights.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn correlations_are_ascending_and_bounded() {
        let pre = textured(20, 20, 2);
        let post = RasterImage::from_fn(20, 20, 2, |x, y, b| {
            (pre.get(x, y, 1 - b) * 0.7 + ((x * y) % 5) as f32 * 0.05).min(1.0)
        })
        .unwrap();
        let x = pixel_matrix(&pre);
        let y = pixel_matrix(&post);
        let c = cca(&x, &y, &vec![1.0; 400], 1e-8).unwrap();
        assert!(c.rho.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.rho.iter().all(|r| (0.0..=1.0).contains(r)));
    }
}
