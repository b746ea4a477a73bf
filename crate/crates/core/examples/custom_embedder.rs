//! Plugs a user-defined patch embedder into the detector.
//!
//! `cargo run --example custom_embedder`

use protochange::config::{PrototypeSpec, RefineSource};
use protochange::features::{patch_grid, FeatureMap, PatchEmbedder, PATCH_SIZE};
use protochange::metrics::{class_metrics, confusion};
use protochange::prototype::PrototypeSource;
use protochange::synthetic::{generate_scene, SceneParams};
use protochange::{detect_with, PipelineConfig, RasterImage};

/// Per-band patch means and nothing else.
struct BandMeans;

impl PatchEmbedder for BandMeans {
    fn dim(&self) -> usize {
        3
    }

    fn extract(&self, img: &RasterImage) -> protochange::Result<FeatureMap> {
        let grid = patch_grid(img.width(), img.height(), PATCH_SIZE)?;
        let mut data = Vec::with_capacity(grid.cells() * 3);
        for i in 0..grid.cells() {
            let (r, c) = grid.cell(i);
            for b in 0..3 {
                let mut sum = 0.0;
                for y in r * PATCH_SIZE..(r + 1) * PATCH_SIZE {
                    for x in c * PATCH_SIZE..(c + 1) * PATCH_SIZE {
                        sum += img.get(x, y, b.min(img.bands() - 1));
                    }
                }
                data.push(sum / (PATCH_SIZE * PATCH_SIZE) as f32);
            }
        }
        FeatureMap::new(grid, 3, data)
    }
}

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SceneParams::default());
    let dir = tempfile::tempdir()?;
    let mask_path = dir.path().join("prototype.png");
    scene.change_mask(0).save(&mask_path, None)?;

    let mut config = PipelineConfig {
        prototype: PrototypeSpec::Mask { path: mask_path, source: PrototypeSource::Post },
        ..Default::default()
    };
    config.refine.source = RefineSource::Post;

    let det = detect_with(&scene.pair, &config, &BandMeans)?;
    let m = class_metrics(&confusion(&det.mask, &scene.label)?)?;
    println!("band-mean embedder: F1(change) {:.3}, {} coarse cells", m.f1_1, det.report.coarse_changed_cells);
    Ok(())
}
