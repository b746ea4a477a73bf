//! Synthetic bi-temporal scenes with known change, for tests and demos.
//!
//! A scene has a smooth textured background, a few static "buildings" present
//! in both epochs, and bright square structures that only appear in the post
//! image. The label is the union of the new squares.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::{save_image, BitDepth, ChangeMask, ImagePair, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    /// Standard deviation of the per-pixel Gaussian noise, independent per epoch.
    pub noise: f32,
    pub squares: usize,
    pub square_size: usize,
    pub buildings: usize,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            bands: 3,
            noise: 0.01,
            squares: 3,
            square_size: 28,
            buildings: 4,
            seed: 7,
        }
    }
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }

    pub fn mask(&self, width: usize, height: usize) -> ChangeMask {
        ChangeMask::from_fn(width, height, |x, y| self.contains(x, y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub pair: ImagePair,
    pub label: ChangeMask,
    /// New structures; the first one is aligned to the 14-px patch grid.
    pub changes: Vec<Rect>,
    pub buildings: Vec<Rect>,
}

impl SyntheticScene {
    /// Mask of the `i`-th new structure, usable as a prototype mask over the post image.
    pub fn change_mask(&self, i: usize) -> ChangeMask {
        self.changes[i].mask(self.pair.width(), self.pair.height())
    }
}

/// Builds a scene. Structures occupy distinct cells of a 56-px layout grid;
/// change squares alternate between grid-aligned and 7-px-offset placement.
pub fn generate_scene(p: &SceneParams) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let slot = 56;
    let (sx, sy) = (p.width / slot, p.height / slot);
    let mut slots: Vec<(usize, usize)> = (0..sy).flat_map(|j| (0..sx).map(move |i| (i, j))).collect();
    for i in (1..slots.len()).rev() {
        slots.swap(i, rng.random_range(0..=i));
    }
    let mut free = slots.into_iter();

    let mut changes = Vec::new();
    for k in 0..p.squares {
        let Some((i, j)) = free.next() else { break };
        let off = if k % 2 == 0 { 0 } else { 7 };
        changes.push(Rect {
            x: i * slot + 14 + off,
            y: j * slot + 14 + off,
            width: p.square_size,
            height: p.square_size,
        });
    }
    let mut buildings = Vec::new();
    for _ in 0..p.buildings {
        let Some((i, j)) = free.next() else { break };
        buildings.push(Rect {
            x: i * slot + 8 + rng.random_range(0..8),
            y: j * slot + 8 + rng.random_range(0..8),
            width: rng.random_range(18..36),
            height: rng.random_range(18..36),
        });
    }
    let building_tone: Vec<f32> = buildings.iter().map(|_| rng.random_range(0.55..0.7)).collect();
    let phase: Vec<f32> = (0..p.bands).map(|_| rng.random_range(0.0..std::f32::consts::TAU)).collect();

    let base = |x: usize, y: usize, b: usize| -> f32 {
        let (xf, yf) = (x as f32, y as f32);
        let mut v = 0.28 + 0.02 * b as f32 + 0.03 * (xf / 9.0 + phase[b]).sin() * (yf / 13.0).cos();
        for (r, &t) in buildings.iter().zip(&building_tone) {
            if r.contains(x, y) {
                v = t - 0.05 * b as f32;
            }
        }
        v
    };
    let noise = Normal::new(0.0f32, p.noise.max(0.0)).expect("finite noise");
    let sample = |v: f32, rng: &mut ChaCha8Rng| -> f32 {
        if p.noise > 0.0 {
            (v + noise.sample(rng)).clamp(0.0, 1.0)
        } else {
            v.clamp(0.0, 1.0)
        }
    };

    let (w, h, nb) = (p.width, p.height, p.bands);
    let mut pre = Vec::with_capacity(w * h * nb);
    let mut post = Vec::with_capacity(w * h * nb);
    for y in 0..h {
        for x in 0..w {
            let new = changes.iter().any(|r| r.contains(x, y));
            for b in 0..nb {
                let v = base(x, y, b);
                pre.push(sample(v, &mut rng));
                let v2 = if new { 0.95 - 0.02 * b as f32 } else { v };
                post.push(sample(v2, &mut rng));
            }
        }
    }
    let pre = RasterImage::new(w, h, nb, pre).expect("values clamped to [0,1]");
    let post = RasterImage::new(w, h, nb, post).expect("values clamped to [0,1]");
    let label = ChangeMask::from_fn(w, h, |x, y| changes.iter().any(|r| r.contains(x, y)));
    SyntheticScene {
        pair: ImagePair::new(pre, post).expect("same geometry"),
        label,
        changes,
        buildings,
    }
}

/// Writes `count` scenes as 8-bit PNGs in the `A/`, `B/`, `label/` layout,
/// with the first new structure of each scene as its `prototype/` mask.
/// Scene `i` uses seed `params.seed + i` and is named `scene_<i>.png`.
pub fn write_levir_dataset(root: &Path, count: usize, params: &SceneParams) -> Result<Vec<String>> {
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let scene = generate_scene(&SceneParams {
            seed: params.seed + i as u64,
            ..*params
        });
        let id = format!("scene_{i:03}");
        let name = format!("{id}.png");
        save_image(scene.pair.pre(), root.join("A").join(&name), BitDepth::Eight)?;
        save_image(scene.pair.post(), root.join("B").join(&name), BitDepth::Eight)?;
        scene.label.save(root.join("label").join(&name), None)?;
        if !scene.changes.is_empty() {
            scene.change_mask(0).save(root.join("prototype").join(&name), None)?;
        }
        ids.push(id);
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_is_deterministic_and_labeled() {
        let p = SceneParams::default();
        let a = generate_scene(&p);
        assert_eq!(a, generate_scene(&p));
        assert_eq!(a.changes.len(), 3);
        assert_eq!(a.label.count_changed(), 3 * 28 * 28);
        assert_eq!(a.changes[0].x % 14, 0);
        assert_eq!(a.changes[1].x % 14, 7);
    }

    #[test]
    fn noise_free_scene_changes_only_inside_squares() {
        let s = generate_scene(&SceneParams {
            noise: 0.0,
            ..Default::default()
        });
        for y in 0..256 {
            for x in 0..256 {
                let same = s.pair.pre().pixel(x, y) == s.pair.post().pixel(x, y);
                assert_eq!(same, !s.label.get(x, y));
            }
        }
    }
}
