use std::f32::consts::PI;

use super::{patch_grid, FeatureMap, PatchEmbedder, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

const ORIENTATION_BINS: usize = 8;

/// Model-free patch descriptor.
///
/// Layout per cell: `[mean(b) for b in bands] ++ [std(b) for b in bands] ++
/// hist[8]`, then zero-padded or truncated to `dim`. The histogram bins the
/// gradient orientation of the band-averaged intensity, weighted by gradient
/// magnitude and divided by the patch area. Gradients use central differences
/// clamped to the patch, so a cell depends on its own pixels only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchStatistics {
    dim: usize,
}

impl PatchStatistics {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 4 {
            return Err(Error::Config(format!(
                "patch-statistics backend needs dim >= 4, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    fn describe(&self, img: &RasterImage, gray: &[f32], x0: usize, y0: usize, out: &mut [f32]) {
        let bands = img.bands();
        let p = PATCH_SIZE;
        let area = (p * p) as f64;
        let mut raw = Vec::with_capacity(2 * bands + ORIENTATION_BINS);

        let mut sums = vec![0f64; bands];
        for y in y0..y0 + p {
            for x in x0..x0 + p {
                for (b, s) in sums.iter_mut().enumerate() {
                    *s += img.get(x, y, b) as f64;
                }
            }
        }
        let means: Vec<f64> = sums.iter().map(|s| s / area).collect();
        let mut sq = vec![0f64; bands];
        for y in y0..y0 + p {
            for x in x0..x0 + p {
                for (b, s) in sq.iter_mut().enumerate() {
                    let d = img.get(x, y, b) as f64 - means[b];
                    *s += d * d;
                }
            }
        }
        raw.extend(means.iter().map(|&m| m as f32));
        raw.extend(sq.iter().map(|&s| (s / area).sqrt() as f32));

        let w = img.width();
        let at = |x: usize, y: usize| gray[y * w + x];
        let mut hist = [0f32; ORIENTATION_BINS];
        for y in y0..y0 + p {
            let (ya, yb) = (y.saturating_sub(1).max(y0), (y + 1).min(y0 + p - 1));
            for x in x0..x0 + p {
                let (xa, xb) = (x.saturating_sub(1).max(x0), (x + 1).min(x0 + p - 1));
                let gx = (at(xb, y) - at(xa, y)) / (xb - xa) as f32;
                let gy = (at(x, yb) - at(x, ya)) / (yb - ya) as f32;
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let theta = gy.atan2(gx).rem_euclid(2.0 * PI);
                let bin = ((theta / (2.0 * PI) * ORIENTATION_BINS as f32) as usize)
                    .min(ORIENTATION_BINS - 1);
                hist[bin] += mag;
            }
        }
        raw.extend(hist.iter().map(|h| h / area as f32));

        for (o, v) in out.iter_mut().zip(raw.iter().chain(std::iter::repeat(&0.0))) {
            *o = *v;
        }
    }
}

impl PatchEmbedder for PatchStatistics {
    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, img: &RasterImage) -> Result<FeatureMap> {
        let grid = patch_grid(img.width(), img.height(), PATCH_SIZE)?;
        let gray = img.gray();
        let mut data = vec![0f32; grid.cells() * self.dim];
        for (i, out) in data.chunks_exact_mut(self.dim).enumerate() {
            let (r, c) = grid.cell(i);
            self.describe(img, &gray, c * PATCH_SIZE, r * PATCH_SIZE, out);
        }
        FeatureMap::new(grid, self.dim, data)
    }
}
