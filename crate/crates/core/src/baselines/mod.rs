//! Classical unsupervised change detectors: CVA, PCA-KMeans, IRMAD and SFA.
//!
//! Each maps an [`ImagePair`] to a [`ChangeMask`]; the score-based ones also
//! expose their per-pixel [`ScoreMap`].

pub mod cva;
pub mod irmad;
pub mod pca_kmeans;
pub mod sfa;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::raster::{ChangeMask, ImagePair, RasterImage};

pub use cva::cva_baseline;
pub use irmad::{cca, irmad_baseline, Cca, IrmadParams, IrmadResult};
pub use pca_kmeans::{pca_kmeans_baseline, PcaKMeansParams};
pub use sfa::{sfa_baseline, SfaModel, SfaParams, SfaResult};

/// Per-pixel nonnegative change magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    scores: Vec<f64>,
}

impl ScoreMap {
    pub fn new(width: usize, height: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != width * height || scores.is_empty() {
            return Err(Error::InvalidRaster(format!(
                "{} scores for {width}x{height}",
                scores.len()
            )));
        }
        if let Some(v) = scores.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidRaster(format!("score {v} is not a finite nonnegative value")));
        }
        Ok(Self {
            width,
            height,
            scores,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }

    pub fn threshold(&self, cut: impl Fn(f64) -> bool) -> ChangeMask {
        ChangeMask::from_fn(self.width, self.height, |x, y| cut(self.get(x, y)))
    }
}

/// An Otsu cut over a fixed histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtsuCut {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
    /// Bins `cut_bin..` form the upper class.
    pub cut_bin: usize,
    /// Lower edge of `cut_bin`.
    pub threshold: f64,
}

impl OtsuCut {
    pub fn bin_of(&self, v: f64) -> usize {
        let t = (v - self.min) / (self.max - self.min) * self.bins as f64;
        (t.max(0.0) as usize).min(self.bins - 1)
    }

    pub fn is_above(&self, v: f64) -> bool {
        self.bin_of(v) >= self.cut_bin
    }

    pub fn apply(&self, scores: &ScoreMap) -> ChangeMask {
        scores.threshold(|v| self.is_above(v))
    }
}

/// Histogram cut maximizing the between-class variance `w0 w1 (mu0 - mu1)^2`.
///
/// Class means use the exact sample values falling into each bin. The first
/// maximizing cut wins.
pub fn otsu_threshold(scores: &ScoreMap, bins: usize) -> Result<OtsuCut> {
    otsu_values(scores.scores(), bins)
}

pub fn otsu_values(values: &[f64], bins: usize) -> Result<OtsuCut> {
    if values.is_empty() {
        return Err(Error::ConstantScores);
    }
    let bins = bins.max(2);
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if max <= min {
        return Err(Error::ConstantScores);
    }
    let probe = OtsuCut {
        min,
        max,
        bins,
        cut_bin: 0,
        threshold: min,
    };
    let mut count = vec![0f64; bins];
    let mut sum = vec![0f64; bins];
    for &v in values {
        let b = probe.bin_of(v);
        count[b] += 1.0;
        sum[b] += v;
    }
    let total_n: f64 = count.iter().sum();
    let total_s: f64 = sum.iter().sum();
    let (mut n0, mut s0) = (0.0, 0.0);
    let mut best = (1, f64::NEG_INFINITY);
    for t in 1..bins {
        n0 += count[t - 1];
        s0 += sum[t - 1];
        let n1 = total_n - n0;
        if n0 == 0.0 || n1 == 0.0 {
            continue;
        }
        let diff = s0 / n0 - (total_s - s0) / n1;
        let between = (n0 / total_n) * (n1 / total_n) * diff * diff;
        if between > best.1 {
            best = (t, between);
        }
    }
    Ok(OtsuCut {
        cut_bin: best.0,
        threshold: min + best.0 as f64 * (max - min) / bins as f64,
        ..probe
    })
}

/// Upper `confidence` quantile of the chi-square distribution with `dof` degrees.
pub fn chi2_quantile(dof: usize, confidence: f64) -> Result<f64> {
    let d = ChiSquared::new(dof as f64).map_err(|e| Error::Config(format!("chi-square({dof}): {e}")))?;
    Ok(d.inverse_cdf(confidence))
}

/// Survival function `P(X > z)` for a chi-square with `dof` degrees.
pub(crate) fn chi2_survival(dof: usize, z: f64) -> Result<f64> {
    let d = ChiSquared::new(dof as f64).map_err(|e| Error::Config(format!("chi-square({dof}): {e}")))?;
    Ok(d.sf(z))
}

/// `n x bands` matrix of pixel vectors.
pub(crate) fn pixel_matrix(img: &RasterImage) -> Matrix {
    Matrix::from_vec(
        img.width() * img.height(),
        img.bands(),
        img.pixels().iter().map(|&v| v as f64).collect(),
    )
}

const CHUNK: usize = 4096;

/// Weighted mean and covariance of the rows of `a` and `b`, plus their cross
/// covariance. Partial sums are formed over fixed row chunks and combined in
/// chunk order, so the result does not depend on the thread count.
pub(crate) struct WeightedMoments {
    pub mean_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub cov_aa: Matrix,
    pub cov_bb: Matrix,
    pub cov_ab: Matrix,
}

fn chunked_sum<T: Send>(
    n: usize,
    zero: impl Fn() -> T + Sync,
    f: impl Fn(usize, &mut T) + Sync,
    merge: impl Fn(&mut T, T),
) -> T {
    let parts: Vec<T> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = zero();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = zero();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

pub(crate) fn weighted_moments(a: &Matrix, b: &Matrix, w: &[f64]) -> WeightedMoments {
    let (n, p, q) = (a.rows(), a.cols(), b.cols());
    let (sw, sa, sb) = chunked_sum(
        n,
        || (0.0, vec![0.0; p], vec![0.0; q]),
        |i, (sw, sa, sb)| {
            *sw += w[i];
            sa.iter_mut().zip(a.row(i)).for_each(|(s, v)| *s += w[i] * v);
            sb.iter_mut().zip(b.row(i)).for_each(|(s, v)| *s += w[i] * v);
        },
        |t, (sw, sa, sb)| {
            t.0 += sw;
            t.1.iter_mut().zip(sa).for_each(|(x, y)| *x += y);
            t.2.iter_mut().zip(sb).for_each(|(x, y)| *x += y);
        },
    );
    let mean_a: Vec<f64> = sa.iter().map(|s| s / sw).collect();
    let mean_b: Vec<f64> = sb.iter().map(|s| s / sw).collect();
    let m = p + q;
    let joint = chunked_sum(
        n,
        || vec![0.0; m * m],
        |i, acc| {
            let z: Vec<f64> = a
                .row(i)
                .iter()
                .zip(&mean_a)
                .map(|(v, mu)| v - mu)
                .chain(b.row(i).iter().zip(&mean_b).map(|(v, mu)| v - mu))
                .collect();
            for r in 0..m {
                for c in r..m {
                    acc[r * m + c] += w[i] * z[r] * z[c];
                }
            }
        },
        |t, s| t.iter_mut().zip(s).for_each(|(x, y)| *x += y),
    );
    let at = |r: usize, c: usize| {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        joint[r * m + c] / sw
    };
    WeightedMoments {
        cov_aa: Matrix::from_fn(p, p, &at),
        cov_bb: Matrix::from_fn(q, q, |r, c| at(p + r, p + c)),
        cov_ab: Matrix::from_fn(p, q, |r, c| at(r, p + c)),
        mean_a,
        mean_b,
    }
}

/// The baseline methods, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Cva,
    PcaKMeans,
    Irmad,
    Sfa,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [Self::Cva, Self::PcaKMeans, Self::Irmad, Self::Sfa];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cva => "cva",
            Self::PcaKMeans => "pcakmeans",
            Self::Irmad => "irmad",
            Self::Sfa => "sfa",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown baseline method `{name}`")))
    }
}

/// Parameters for every baseline, so one value can drive any method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BaselineParams {
    pub pca_kmeans: PcaKMeansParams,
    pub irmad: IrmadParams,
    pub sfa: SfaParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub mask: ChangeMask,
    pub scores: Option<ScoreMap>,
}

pub fn run_baseline(
    method: BaselineMethod,
    pair: &ImagePair,
    params: &BaselineParams,
) -> Result<BaselineOutput> {
    Ok(match method {
        BaselineMethod::Cva => {
            let (scores, mask) = cva::cva_scores_and_mask(pair)?;
            BaselineOutput {
                mask,
                scores: Some(scores),
            }
        }
        BaselineMethod::PcaKMeans => BaselineOutput {
            mask: pca_kmeans_baseline(pair, &params.pca_kmeans)?,
            scores: None,
        },
        BaselineMethod::Irmad => {
            let r = irmad_baseline(pair, &params.irmad)?;
            BaselineOutput {
                mask: r.mask,
                scores: Some(r.scores),
            }
        }
        BaselineMethod::Sfa => {
            let r = sfa_baseline(pair, &params.sfa)?;
            BaselineOutput {
                mask: r.mask,
                scores: Some(r.scores),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bimodal_scores_split_between_modes() {
        let v: Vec<f64> = (0..1000).map(|i| if i < 500 { 0.1 } else { 0.9 }).collect();
        let cut = otsu_values(&v, 256).unwrap();
        assert!(cut.threshold > 0.1 && cut.threshold < 0.9);
        assert_eq!(v.iter().filter(|&&x| cut.is_above(x)).count(), 500);
    }

    #[test]
    fn constant_scores_error() {
        assert!(matches!(otsu_values(&[0.3; 10], 256), Err(Error::ConstantScores)));
    }

    #[test]
    fn chi2_quantile_matches_table() {
        // Standard table values.
        assert!((chi2_quantile(1, 0.99).unwrap() - 6.6349).abs() < 1e-3);
        assert!((chi2_quantile(3, 0.99).unwrap() - 11.3449).abs() < 1e-3);
    }

    #[test]
    fn moments_match_direct_formula() {
        let a = Matrix::from_fn(10_000, 2, |r, c| ((r * 7 + c * 3) % 11) as f64);
        let b = Matrix::from_fn(10_000, 1, |r, _| ((r * 5) % 13) as f64);
        let w: Vec<f64> = (0..10_000).map(|i| 0.5 + (i % 3) as f64).collect();
        let m = weighted_moments(&a, &b, &w);
        let sw: f64 = w.iter().sum();
        let mb = (0..10_000).map(|i| w[i] * b[(i, 0)]).sum::<f64>() / sw;
        let ma0 = (0..10_000).map(|i| w[i] * a[(i, 0)]).sum::<f64>() / sw;
        let cab = (0..10_000)
            .map(|i| w[i] * (a[(i, 0)] - ma0) * (b[(i, 0)] - mb))
            .sum::<f64>()
            / sw;
        assert!((m.mean_b[0] - mb).abs() < 1e-12);
        assert!((m.cov_ab[(0, 0)] - cab).abs() < 1e-9);
    }
}
