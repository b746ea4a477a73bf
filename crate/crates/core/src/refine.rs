//! Object-level refinement of block-resolution change masks.
//!
//! Segments come from precomputed 16-bit label PNGs (e.g. exported automatic
//! masks of a segmentation model) or from a deterministic quantize-and-label
//! segmenter. A segment is kept in full when the fraction of its own pixels
//! inside the coarse mask is strictly greater than the threshold.

use std::collections::HashMap;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ChangeMask, RasterImage};

/// Per-pixel segment ids; `0` is unsegmented background, `1..=M` are segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    counts: Vec<usize>,
}

impl SegmentMap {
    /// Builds a map from arbitrary ids, relabeling positive ids to `1..=M` in
    /// order of first appearance (row-major).
    pub fn from_raw(width: usize, height: usize, raw: &[u32]) -> Result<Self> {
        if raw.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "segment labels: expected {} values, got {}",
                width * height,
                raw.len()
            )));
        }
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut counts = Vec::new();
        let labels = raw
            .iter()
            .map(|&id| {
                if id == 0 {
                    return 0;
                }
                let next = remap.len() as u32 + 1;
                let new = *remap.entry(id).or_insert(next);
                if new as usize > counts.len() {
                    counts.push(0);
                }
                counts[new as usize - 1] += 1;
                new
            })
            .collect();
        Ok(Self {
            width,
            height,
            labels,
            counts,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn segment_count(&self) -> usize {
        self.counts.len()
    }

    /// Pixel count of segment `id` (1-based).
    pub fn size_of(&self, id: u32) -> usize {
        self.counts[id as usize - 1]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn mask_of(&self, id: u32) -> ChangeMask {
        ChangeMask::new(
            self.width,
            self.height,
            self.labels.iter().map(|&l| (l == id) as u8).collect(),
        )
        .expect("dimensions are consistent")
    }

    /// Nearest-neighbour resampling; ids are re-compacted afterwards.
    pub fn resize_nearest(&self, width: usize, height: usize) -> SegmentMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let xs = crate::raster::nearest_index_map(self.width, width);
        let ys = crate::raster::nearest_index_map(self.height, height);
        let mut raw = Vec::with_capacity(width * height);
        for &sy in &ys {
            for &sx in &xs {
                raw.push(self.get(sx, sy));
            }
        }
        SegmentMap::from_raw(width, height, &raw).expect("dimensions are consistent")
    }

    /// Writes a 16-bit single-channel PNG.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.counts.len() > u16::MAX as usize {
            return Err(Error::UnsupportedFormat(format!(
                "{} segments do not fit a 16-bit PNG",
                self.counts.len()
            )));
        }
        let data: Vec<u16> = self.labels.iter().map(|&l| l as u16).collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, data)
                .expect("buffer length matches dimensions");
        let mut out = Cursor::new(Vec::new());
        DynamicImage::ImageLuma16(buf)
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
        std::fs::write(path, out.into_inner())?;
        Ok(())
    }
}

/// Loads a single-channel 16-bit (or 8-bit) segment PNG of the given size.
pub fn load_segments(path: impl AsRef<Path>, width: usize, height: usize) -> Result<SegmentMap> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::CorruptData {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if (w, h) != (width, height) {
        return Err(Error::DimensionMismatch(format!(
            "segment map {} is {w}x{h}, scene is {width}x{height}",
            path.display()
        )));
    }
    let raw: Vec<u32> = match img {
        DynamicImage::ImageLuma16(b) => b.as_raw().iter().map(|&v| v as u32).collect(),
        DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v as u32).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: segment maps must be single-channel, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    SegmentMap::from_raw(w, h, &raw)
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

/// Deterministic stand-in for a learned segmenter.
///
/// Each band is quantized to `quant_levels` levels; 4-connected pixels with the
/// same quantized tuple form a component. Components smaller than `min_size`
/// are merged, pass by pass, into their largest touching neighbour (ties go to
/// the neighbour whose root pixel comes first).
pub fn builtin_segments(img: &RasterImage, quant_levels: usize, min_size: usize) -> SegmentMap {
    let (w, h) = (img.width(), img.height());
    let q = quant_levels.max(1);
    let codes: Vec<u64> = (0..w * h)
        .map(|i| {
            img.pixel(i % w, i / w).iter().fold(0u64, |acc, &v| {
                let level = ((v * q as f32) as usize).min(q - 1) as u64;
                acc.wrapping_mul(q as u64).wrapping_add(level)
            })
        })
        .collect();

    let mut parent: Vec<u32> = (0..(w * h) as u32).collect();
    let union = |parent: &mut Vec<u32>, a: u32, b: u32| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            // Lower index becomes the root, so roots are first pixels.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi as usize] = lo;
        }
    };
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as u32;
            if x + 1 < w && codes[i as usize] == codes[i as usize + 1] {
                union(&mut parent, i, i + 1);
            }
            if y + 1 < h && codes[i as usize] == codes[i as usize + w] {
                union(&mut parent, i, i + w as u32);
            }
        }
    }

    if min_size > 1 {
        loop {
            let roots: Vec<u32> = (0..(w * h) as u32).map(|i| find(&mut parent, i)).collect();
            let mut size = vec![0usize; w * h];
            for &r in &roots {
                size[r as usize] += 1;
            }
            // For each small root: (neighbour size, neighbour root) of the best neighbour.
            let mut best: HashMap<u32, (usize, u32)> = HashMap::new();
            let consider = |a: u32, b: u32, best: &mut HashMap<u32, (usize, u32)>| {
                if size[a as usize] < min_size {
                    let cand = (size[b as usize], b);
                    let e = best.entry(a).or_insert(cand);
                    if cand.0 > e.0 || (cand.0 == e.0 && cand.1 < e.1) {
                        *e = cand;
                    }
                }
            };
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let mut edge = |j: usize| {
                        let (a, b) = (roots[i], roots[j]);
                        if a != b {
                            consider(a, b, &mut best);
                            consider(b, a, &mut best);
                        }
                    };
                    if x + 1 < w {
                        edge(i + 1);
                    }
                    if y + 1 < h {
                        edge(i + w);
                    }
                }
            }
            if best.is_empty() {
                break;
            }
            let mut merges: Vec<(u32, u32)> = best.into_iter().map(|(a, (_, b))| (a, b)).collect();
            merges.sort_unstable();
            for (a, b) in merges {
                union(&mut parent, a, b);
            }
        }
    }

    let raw: Vec<u32> = (0..(w * h) as u32)
        .map(|i| find(&mut parent, i) + 1)
        .collect();
    SegmentMap::from_raw(w, h, &raw).expect("dimensions are consistent")
}

/// Per-segment overlap bookkeeping returned by [`refine_with_stats`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefineStats {
    pub segments: usize,
    pub retained: usize,
    pub retained_pixels: usize,
}

/// Overlap fraction `|s ∩ coarse| / |s|` of every segment, indexed by `id - 1`.
pub fn segment_overlaps(coarse: &ChangeMask, segments: &SegmentMap) -> Result<Vec<f64>> {
    if coarse.width() != segments.width() || coarse.height() != segments.height() {
        return Err(Error::DimensionMismatch(format!(
            "coarse mask {}x{} vs segments {}x{}",
            coarse.width(),
            coarse.height(),
            segments.width(),
            segments.height()
        )));
    }
    let mut inside = vec![0usize; segments.segment_count()];
    for (&l, &c) in segments.labels.iter().zip(coarse.values()) {
        if l != 0 && c != 0 {
            inside[l as usize - 1] += 1;
        }
    }
    Ok(inside
        .iter()
        .zip(&segments.counts)
        .map(|(&i, &n)| i as f64 / n as f64)
        .collect())
}

/// Union of all segments whose overlap with `coarse` exceeds `threshold`.
pub fn refine(coarse: &ChangeMask, segments: &SegmentMap, threshold: f64) -> Result<ChangeMask> {
    refine_with_stats(coarse, segments, threshold).map(|(m, _)| m)
}

pub fn refine_with_stats(
    coarse: &ChangeMask,
    segments: &SegmentMap,
    threshold: f64,
) -> Result<(ChangeMask, RefineStats)> {
    let overlaps = segment_overlaps(coarse, segments)?;
    let keep: Vec<bool> = overlaps.iter().map(|&o| o > threshold).collect();
    let values: Vec<u8> = segments
        .labels
        .iter()
        .map(|&l| (l != 0 && keep[l as usize - 1]) as u8)
        .collect();
    let stats = RefineStats {
        segments: segments.segment_count(),
        retained: keep.iter().filter(|&&k| k).count(),
        retained_pixels: values.iter().filter(|&&v| v != 0).count(),
    };
    Ok((ChangeMask::new(coarse.width(), coarse.height(), values)?, stats))
}
