//! Extracts patch tokens with an ONNX embedder and runs the detector on them.
//!
//! `cargo run --release --example neural_backend [model.onnx]`
//!
//! Without an argument the small test model shipped with the crate is used.

use std::path::PathBuf;

use protochange::config::PrototypeSpec;
use protochange::features::FeatureBackend;
use protochange::metrics::{class_metrics, confusion};
use protochange::prototype::PrototypeSource;
use protochange::synthetic::{generate_scene, SceneParams};
use protochange::{detect, PipelineConfig};

fn main() -> anyhow::Result<()> {
    let model = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/patch_embed_d8.onnx")
    });
    let backend = FeatureBackend::Neural { model: model.clone() };
    let embedder = backend.open()?;

    let scene = generate_scene(&SceneParams { width: 112, height: 112, squares: 2, buildings: 1, ..Default::default() });
    let tokens = embedder.extract(scene.pair.post())?;
    println!(
        "{}: {}x{} tokens of dimension {}",
        model.display(),
        tokens.grid().rows,
        tokens.grid().cols,
        tokens.dim()
    );

    let dir = tempfile::tempdir()?;
    let mask_path = dir.path().join("prototype.png");
    scene.change_mask(0).save(&mask_path, None)?;
    let config = PipelineConfig {
        backend,
        prototype: PrototypeSpec::Mask { path: mask_path, source: PrototypeSource::Post },
        ..Default::default()
    };
    let det = detect(&scene.pair, &config)?;
    let m = class_metrics(&confusion(&det.mask, &scene.label)?)?;
    println!("F1(change) {:.3} with {} coarse cells", m.f1_1, det.report.coarse_changed_cells);
    Ok(())
}
