//! Builds a configuration from TOML plus overrides, runs the detector and
//! replays the run from the configuration recorded in its report.
//!
//! `cargo run --example config_replay`

use protochange::synthetic::{generate_scene, SceneParams};
use protochange::{detect, PipelineConfig};

const TOML: &str = r#"
seed = 11

[prototype]
kind = "random"
source = "post"

[refine]
threshold = 0.6
source = "post"
"#;

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SceneParams::default());

    let mut config = PipelineConfig::default();
    config.merge_toml(TOML)?;
    config.apply_override("backend.dim=24")?;
    for (k, v) in config.to_pairs() {
        println!("{k} = {v}");
    }

    let first = detect(&scene.pair, &config)?;
    let json = first.report.to_json()?;
    println!("prototype: {:?}", first.report.prototype);

    let replayed: protochange::RunReport = serde_json::from_str(&json)?;
    let second = detect(&scene.pair, &replayed.replay_config()?)?;
    assert_eq!(first.mask, second.mask);
    assert_eq!(json, second.report.to_json()?);
    println!("replay reproduced {} changed pixels and an identical report", second.report.changed_pixels);
    Ok(())
}
