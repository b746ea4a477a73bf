//! Runs the detector on a synthetic scene and scores it against the known changes.
//!
//! `cargo run --release --example detect_synthetic [seed]`

use protochange::config::{PipelineConfig, PrototypeSpec};
use protochange::metrics::{class_metrics, confusion};
use protochange::pipeline::detect;
use protochange::prototype::PrototypeSource;
use protochange::synthetic::{generate_scene, SceneParams};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let scene = generate_scene(&SceneParams { seed, ..Default::default() });

    let dir = tempfile::tempdir()?;
    let proto_mask = dir.path().join("prototype.png");
    scene.change_mask(0).save(&proto_mask, None)?;

    let config = PipelineConfig {
        prototype: PrototypeSpec::Mask { path: proto_mask, source: PrototypeSource::Post },
        ..Default::default()
    };

    let det = detect(&scene.pair, &config)?;
    let coarse = class_metrics(&confusion(&det.coarse_mask, &scene.label)?)?;
    let refined = class_metrics(&confusion(&det.mask, &scene.label)?)?;
    println!("vote: {:?}", det.report.clustering.vote);
    println!("coarse cells: {}", det.report.coarse_changed_cells);
    println!("coarse  F1(change) = {:.3}  IoU = {:.3}", coarse.f1_1, coarse.iou1);
    println!("refined F1(change) = {:.3}  IoU = {:.3}", refined.f1_1, refined.iou1);
    Ok(())
}
