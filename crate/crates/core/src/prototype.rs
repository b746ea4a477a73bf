//! Prototype selection and prototype-oriented change synthesis.
//!
//! A prototype is a masked chip of the target of interest placed at an anchor
//! in scene coordinates. Synthesis composites the masked chip pixels into both
//! epochs at the anchor, so `x̂ - x` measures "prototype vs. what the scene
//! holds at that spot" in each epoch. A prototype cut from an epoch at its own
//! location leaves that epoch unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PatchGrid;
use crate::raster::{ChangeMask, ImagePair, RasterImage};
use crate::refine::SegmentMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrototypeSource {
    Pre,
    Post,
    External,
}

/// Top-left placement of a chip in scene pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub row: usize,
    pub col: usize,
}

impl Anchor {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    chip: RasterImage,
    mask: ChangeMask,
    anchor: Anchor,
    source: PrototypeSource,
    segment: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedPair {
    pub synth_pre: RasterImage,
    pub synth_post: RasterImage,
}

fn bounding_box(mask: &ChangeMask) -> Option<(usize, usize, usize, usize)> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (x0 != usize::MAX).then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
}

impl Prototype {
    /// Prototype from an image not taken from the scene. Without an anchor the
    /// chip is centred in the `scene_width` x `scene_height` scene.
    pub fn external(
        chip: RasterImage,
        mask: ChangeMask,
        anchor: Option<Anchor>,
        scene_width: usize,
        scene_height: usize,
    ) -> Result<Self> {
        if mask.width() != chip.width() || mask.height() != chip.height() {
            return Err(Error::DimensionMismatch(format!(
                "chip is {}x{}, mask is {}x{}",
                chip.width(),
                chip.height(),
                mask.width(),
                mask.height()
            )));
        }
        if mask.count_changed() == 0 {
            return Err(Error::EmptyMask);
        }
        if chip.width() > scene_width || chip.height() > scene_height {
            return Err(Error::OutOfBounds(format!(
                "chip {}x{} larger than scene {scene_width}x{scene_height}",
                chip.width(),
                chip.height()
            )));
        }
        let anchor = anchor.unwrap_or(Anchor {
            row: (scene_height - chip.height()) / 2,
            col: (scene_width - chip.width()) / 2,
        });
        let p = Self {
            chip,
            mask,
            anchor,
            source: PrototypeSource::External,
            segment: None,
        };
        p.check_fits(scene_width, scene_height)?;
        Ok(p)
    }

    pub fn chip(&self) -> &RasterImage {
        &self.chip
    }

    pub fn mask(&self) -> &ChangeMask {
        &self.mask
    }

    pub fn anchor(&self) -> Anchor {
        self.anchor
    }

    pub fn source(&self) -> PrototypeSource {
        self.source
    }

    /// Segment id the prototype was drawn from, for random selection.
    pub fn segment(&self) -> Option<u32> {
        self.segment
    }

    pub fn mask_pixels(&self) -> usize {
        self.mask.count_changed()
    }

    pub fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        if self.anchor.col + self.chip.width() > width
            || self.anchor.row + self.chip.height() > height
        {
            return Err(Error::OutOfBounds(format!(
                "chip {}x{} at (row {}, col {}) exceeds scene {width}x{height}",
                self.chip.width(),
                self.chip.height(),
                self.anchor.row,
                self.anchor.col
            )));
        }
        Ok(())
    }

    /// Scene-sized mask of the pixels the prototype overwrites.
    pub fn footprint(&self, width: usize, height: usize) -> Result<ChangeMask> {
        self.check_fits(width, height)?;
        let mut out = ChangeMask::zeros(width, height);
        for y in 0..self.mask.height() {
            for x in 0..self.mask.width() {
                if self.mask.get(x, y) {
                    out.set(self.anchor.col + x, self.anchor.row + y, true);
                }
            }
        }
        Ok(out)
    }

    /// Copy of `img` with the masked chip pixels written at the anchor.
    pub fn composite(&self, img: &RasterImage) -> Result<RasterImage> {
        self.check_fits(img.width(), img.height())?;
        if self.chip.bands() != img.bands() {
            return Err(Error::DimensionMismatch(format!(
                "prototype has {} bands, scene has {}",
                self.chip.bands(),
                img.bands()
            )));
        }
        let mut out = img.clone();
        for y in 0..self.mask.height() {
            for x in 0..self.mask.width() {
                if self.mask.get(x, y) {
                    out.set_pixel(
                        self.anchor.col + x,
                        self.anchor.row + y,
                        self.chip.pixel(x, y),
                    );
                }
            }
        }
        Ok(out)
    }
}

/// Cuts the bounding box of `mask` out of `img`.
///
/// `mask` is placed with its top-left corner at `offset` in `img`; a mask the
/// size of the image uses `Anchor::new(0, 0)`.
pub fn select_prototype_manual(
    img: &RasterImage,
    mask: &ChangeMask,
    offset: Anchor,
    source: PrototypeSource,
) -> Result<Prototype> {
    if offset.col + mask.width() > img.width() || offset.row + mask.height() > img.height() {
        return Err(Error::OutOfBounds(format!(
            "mask {}x{} at (row {}, col {}) exceeds image {}x{}",
            mask.width(),
            mask.height(),
            offset.row,
            offset.col,
            img.width(),
            img.height()
        )));
    }
    let (bx, by, bw, bh) = bounding_box(mask).ok_or(Error::EmptyMask)?;
    let (ox, oy) = (offset.col + bx, offset.row + by);
    let chip = RasterImage::from_fn(bw, bh, img.bands(), |x, y, b| img.get(ox + x, oy + y, b))?;
    let chip_mask = ChangeMask::from_fn(bw, bh, |x, y| mask.get(bx + x, by + y));
    Ok(Prototype {
        chip,
        mask: chip_mask,
        anchor: Anchor { row: oy, col: ox },
        source,
        segment: None,
    })
}

/// Picks one segment uniformly with a seeded ChaCha8 generator.
pub fn select_prototype_random(
    segments: &SegmentMap,
    img: &RasterImage,
    seed: u64,
    source: PrototypeSource,
) -> Result<Prototype> {
    if segments.width() != img.width() || segments.height() != img.height() {
        return Err(Error::DimensionMismatch(format!(
            "segments {}x{} vs image {}x{}",
            segments.width(),
            segments.height(),
            img.width(),
            img.height()
        )));
    }
    let count = segments.segment_count();
    if count == 0 {
        return Err(Error::NoSegments);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = rng.random_range(1..=count as u32);
    let mut p = select_prototype_manual(img, &segments.mask_of(id), Anchor::new(0, 0), source)?;
    p.segment = Some(id);
    Ok(p)
}

/// Composites the prototype into both epochs.
pub fn synthesize_pair(pair: &ImagePair, p: &Prototype) -> Result<SynthesizedPair> {
    Ok(SynthesizedPair {
        synth_pre: p.composite(pair.pre())?,
        synth_post: p.composite(pair.post())?,
    })
}

/// Row-major indices of grid cells whose area is covered by the prototype
/// footprint by a fraction strictly above `coverage`.
pub fn prototype_cells(p: &Prototype, grid: &PatchGrid, coverage: f64) -> Vec<usize> {
    let counts = cell_coverage_counts(p, grid);
    let area = (grid.patch * grid.patch) as f64;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c as f64 / area > coverage)
        .map(|(i, _)| i)
        .collect()
}

/// Per-cell count of footprint pixels, ignoring pixels outside the grid.
pub fn cell_coverage_counts(p: &Prototype, grid: &PatchGrid) -> Vec<usize> {
    let mut counts = vec![0usize; grid.cells()];
    for y in 0..p.mask.height() {
        for x in 0..p.mask.width() {
            if !p.mask.get(x, y) {
                continue;
            }
            let (sx, sy) = (p.anchor.col + x, p.anchor.row + y);
            if sx < grid.width() && sy < grid.height() {
                counts[grid.index(sy / grid.patch, sx / grid.patch)] += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::patch_grid;

    fn textured(w: usize, h: usize, seed: usize) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |x, y, b| ((x * 31 + y * 17 + b * 7 + seed) % 97) as f32 / 97.0)
            .unwrap()
    }

    #[test]
    fn full_mask_takes_whole_image() {
        let img = textured(30, 20, 0);
        let mask = ChangeMask::from_fn(30, 20, |_, _| true);
        let p = select_prototype_manual(&img, &mask, Anchor::new(0, 0), PrototypeSource::Pre).unwrap();
        assert_eq!(p.anchor(), Anchor::new(0, 0));
        assert_eq!(p.chip(), &img);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let img = textured(10, 10, 0);
        let mask = ChangeMask::zeros(10, 10);
        assert!(matches!(
            select_prototype_manual(&img, &mask, Anchor::new(0, 0), PrototypeSource::Pre),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn mask_outside_image_is_rejected() {
        let img = textured(10, 10, 0);
        let mask = ChangeMask::from_fn(6, 6, |_, _| true);
        assert!(matches!(
            select_prototype_manual(&img, &mask, Anchor::new(5, 5), PrototypeSource::Pre),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn bounding_box_chip_of_region() {
        let img = textured(64, 64, 1);
        // 20 rows x 30 columns, with a hole so the pixel count differs from the area.
        let mask = ChangeMask::from_fn(64, 64, |x, y| {
            (10..40).contains(&x) && (5..25).contains(&y) && !(x == 20 && y == 10)
        });
        let p = select_prototype_manual(&img, &mask, Anchor::new(0, 0), PrototypeSource::Post).unwrap();
        assert_eq!((p.chip().width(), p.chip().height()), (30, 20));
        assert_eq!(p.anchor(), Anchor::new(5, 10));
        assert_eq!(p.mask_pixels(), mask.count_changed());
        assert_eq!(p.mask_pixels(), 599);
    }

    #[test]
    fn self_composite_is_identity() {
        let pre = textured(56, 56, 2);
        let post = textured(56, 56, 9);
        let pair = ImagePair::new(pre.clone(), post.clone()).unwrap();
        let mask = ChangeMask::from_fn(56, 56, |x, y| (14..30).contains(&x) && (20..41).contains(&y));
        let p = select_prototype_manual(&pre, &mask, Anchor::new(0, 0), PrototypeSource::Pre).unwrap();
        let s = synthesize_pair(&pair, &p).unwrap();
        assert_eq!(s.synth_pre, pre);
        for y in 0..56 {
            for x in 0..56 {
                let differs = s.synth_post.pixel(x, y) != post.pixel(x, y);
                let inside = mask.get(x, y) && pre.pixel(x, y) != post.pixel(x, y);
                assert_eq!(differs, inside, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn external_chip_defaults_to_centre() {
        let scene = textured(56, 42, 3);
        let chip = RasterImage::filled(14, 14, 3, 1.0).unwrap();
        let mask = ChangeMask::from_fn(14, 14, |_, _| true);
        let p = Prototype::external(chip, mask, None, 56, 42).unwrap();
        assert_eq!(p.anchor(), Anchor::new(14, 21));
        let out = p.composite(&scene).unwrap();
        for y in 0..42 {
            for x in 0..56 {
                let inside = (21..35).contains(&x) && (14..28).contains(&y);
                if inside {
                    assert_eq!(out.pixel(x, y), &[1.0, 1.0, 1.0]);
                } else {
                    assert_eq!(out.pixel(x, y), scene.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn cell_membership() {
        let grid = patch_grid(56, 56, 14).unwrap();
        let img = textured(56, 56, 0);
        let one = ChangeMask::from_fn(56, 56, |x, y| x < 14 && y < 14);
        let p = select_prototype_manual(&img, &one, Anchor::new(0, 0), PrototypeSource::Pre).unwrap();
        assert_eq!(prototype_cells(&p, &grid, 0.5), vec![0]);

        let four = ChangeMask::from_fn(56, 56, |x, y| x < 28 && y < 28);
        let p = select_prototype_manual(&img, &four, Anchor::new(0, 0), PrototypeSource::Pre).unwrap();
        assert_eq!(prototype_cells(&p, &grid, 0.5), vec![0, 1, 4, 5]);

        // 40% of cell (0, 0): 14 x 5.6 is not integral, use 7 x 11 = 77 of 196 pixels (39%).
        let partial = ChangeMask::from_fn(56, 56, |x, y| x < 7 && y < 11);
        let p = select_prototype_manual(&img, &partial, Anchor::new(0, 0), PrototypeSource::Pre).unwrap();
        assert!(prototype_cells(&p, &grid, 0.5).is_empty());
        assert_eq!(prototype_cells(&p, &grid, 0.3), vec![0]);
    }
}
