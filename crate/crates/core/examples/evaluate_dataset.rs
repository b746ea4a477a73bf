//! Writes a small labeled dataset and compares every method on it.
//!
//! `cargo run --release --example evaluate_dataset [samples]`

use protochange::config::PipelineConfig;
use protochange::eval::{evaluate, EvalOptions, Method};
use protochange::synthetic::{write_levir_dataset, SceneParams};

fn main() -> anyhow::Result<()> {
    let count = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let dir = tempfile::tempdir()?;
    let root = dir.path().join("data");
    write_levir_dataset(&root, count, &SceneParams::default())?;

    let out = dir.path().join("results");
    let options = EvalOptions {
        methods: Method::ALL.to_vec(),
        out_dir: Some(out.clone()),
    };
    let report = evaluate(&root, &PipelineConfig::default(), &options)?;
    print!("{}", report.render_table());
    println!("failures: {}", report.failures().count());
    for entry in std::fs::read_dir(&out)? {
        println!("wrote {}", entry?.path().display());
    }
    Ok(())
}
