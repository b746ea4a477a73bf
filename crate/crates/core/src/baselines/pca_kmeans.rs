use serde::{Deserialize, Serialize};

use crate::cva::{kmeans, pca_fit, KMeansParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::raster::{ChangeMask, ImagePair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaKMeansParams {
    /// Block side `h`.
    pub block: usize,
    pub components: usize,
    pub seed: u64,
}

impl Default for PcaKMeansParams {
    fn default() -> Self {
        Self {
            block: 4,
            components: 3,
            seed: 0,
        }
    }
}

/// Edge-replicating pad of a `w x h` single-band grid to multiples of `block`.
pub fn pad_to_multiple(
    values: &[f64],
    w: usize,
    h: usize,
    block: usize,
) -> (Vec<f64>, usize, usize) {
    let (pw, ph) = (w.div_ceil(block) * block, h.div_ceil(block) * block);
    let out = (0..pw * ph)
        .map(|i| {
            let (x, y) = ((i % pw).min(w - 1), (i / pw).min(h - 1));
            values[y * w + x]
        })
        .collect();
    (out, pw, ph)
}

/// Per-pixel `‖post - pre‖₂` over bands.
pub fn difference_image(pair: &ImagePair) -> Vec<f64> {
    let b = pair.bands();
    pair.pre()
        .pixels()
        .chunks_exact(b)
        .zip(pair.post().pixels().chunks_exact(b))
        .map(|(p, q)| {
            p.iter()
                .zip(q)
                .map(|(&x, &y)| (y as f64 - x as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// PCA basis from non-overlapping `h x h` blocks of the difference image,
/// one feature per pixel from its `h x h` neighbourhood, k-means with `k = 2`.
/// The cluster with the larger mean difference is the changed one.
pub fn pca_kmeans_baseline(pair: &ImagePair, params: &PcaKMeansParams) -> Result<ChangeMask> {
    let (w, h, blk) = (pair.width(), pair.height(), params.block);
    if blk < 2 {
        return Err(Error::Config(format!("block must be at least 2, got {blk}")));
    }
    if w < blk || h < blk {
        return Err(Error::TooSmallImage {
            width: w,
            height: h,
            block: blk,
        });
    }
    let diff = difference_image(pair);
    if diff.iter().all(|&d| d == 0.0) {
        return Ok(ChangeMask::zeros(w, h));
    }
    let (padded, pw, ph) = pad_to_multiple(&diff, w, h, blk);
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, pw as isize - 1) as usize;
        let y = y.clamp(0, ph as isize - 1) as usize;
        padded[y * pw + x]
    };

    let (bx, by) = (pw / blk, ph / blk);
    let blocks = Matrix::from_fn(bx * by, blk * blk, |r, c| {
        let (x0, y0) = ((r % bx) * blk, (r / bx) * blk);
        at((x0 + c % blk) as isize, (y0 + c / blk) as isize)
    });
    let comps = params.components.min(blocks.rows()).min(blk * blk);
    let model = match pca_fit(&blocks, comps) {
        Ok(m) => m,
        Err(Error::DegenerateData) => return Ok(ChangeMask::zeros(w, h)),
        Err(e) => return Err(e),
    };

    let half = (blk / 2) as isize;
    let projected = Matrix::from_fn(w * h, model.components.len(), |r, j| {
        let (x, y) = ((r % w) as isize, (r / w) as isize);
        model.components[j]
            .iter()
            .zip(&model.mean)
            .enumerate()
            .map(|(c, (wc, mu))| {
                let v = at(x - half + (c % blk) as isize, y - half + (c / blk) as isize);
                wc * (v - mu)
            })
            .sum()
    });
    let km = kmeans(
        &projected,
        &KMeansParams {
            k: 2,
            ..Default::default()
        },
        params.seed,
    )?;

    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&l, &d) in km.labels.iter().zip(&diff) {
        sums[l] += d;
        counts[l] += 1;
    }
    let mean = |j: usize| sums[j] / counts[j].max(1) as f64;
    let changed = if mean(1) > mean(0) { 1 } else { 0 };
    Ok(ChangeMask::from_fn(w, h, |x, y| km.labels[y * w + x] == changed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_replicates_edges() {
        let v: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let (p, pw, ph) = pad_to_multiple(&v, 3, 2, 4);
        assert_eq!((pw, ph), (4, 4));
        assert_eq!(&p[0..4], &[0.0, 1.0, 2.0, 2.0]);
        assert_eq!(&p[12..16], &[3.0, 4.0, 5.0, 5.0]);
        let (_, pw, ph) = pad_to_multiple(&vec![0.0; 130 * 130], 130, 130, 4);
        assert_eq!((pw, ph), (132, 132));
    }
}
