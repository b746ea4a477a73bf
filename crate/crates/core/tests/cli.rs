use std::path::Path;
use std::process::{Command, Output};

use protochange::synthetic::{write_levir_dataset, SceneParams};
use protochange::ChangeMask;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protochange")).args(args).output().unwrap()
}

fn dataset(root: &Path, count: usize) {
    let params = SceneParams {
        width: 112,
        height: 112,
        squares: 2,
        buildings: 1,
        ..Default::default()
    };
    write_levir_dataset(root, count, &params).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn detect_writes_mask_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    dataset(d, 1);
    let (out, report, dump) = (d.join("out.png"), d.join("report.json"), d.join("dump"));
    let o = run(&[
        "detect",
        "--pre", s(&d.join("A/scene_000.png")),
        "--post", s(&d.join("B/scene_000.png")),
        "--prototype", s(&d.join("prototype/scene_000.png")),
        "--label", s(&d.join("label/scene_000.png")),
        "--out", s(&out),
        "--report", s(&report),
        "--dump-intermediate", s(&dump),
        "--set", "refine.source=post",
        "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mask = ChangeMask::load(&out).unwrap();
    assert_eq!((mask.width(), mask.height()), (112, 112));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], "3");
    assert_eq!(json["config"]["refine.source"], "post");
    assert!(json["metrics"].is_object());
    assert!(String::from_utf8_lossy(&o.stdout).contains("pucd"));
    assert!(dump.is_dir());
}

#[test]
fn detect_reports_a_missing_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    dataset(d, 1);
    let o = run(&[
        "detect",
        "--pre", s(&d.join("A/scene_000.png")),
        "--post", s(&d.join("B/scene_000.png")),
        "--backend", "/nonexistent/model.onnx",
        "--out", s(&d.join("out.png")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/model.onnx"));
}

#[test]
fn baseline_runs_each_method() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    dataset(d, 1);
    for method in ["cva", "pcakmeans", "irmad", "sfa"] {
        let out = d.join(format!("{method}.png"));
        let o = run(&[
            "baseline",
            "--method", method,
            "--pre", s(&d.join("A/scene_000.png")),
            "--post", s(&d.join("B/scene_000.png")),
            "--out", s(&out),
            "--label", s(&d.join("label/scene_000.png")),
            "--max-iter", "10",
        ]);
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(ChangeMask::load(&out).is_ok());
        assert!(String::from_utf8_lossy(&o.stdout).contains(method));
    }
    let o = run(&["baseline", "--method", "nope", "--pre", "a", "--post", "b", "--out", "c"]);
    assert!(!o.status.success());
}

#[test]
fn eval_prints_the_table_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (root, out) = (dir.path().join("data"), dir.path().join("out"));
    dataset(&root, 2);
    let o = run(&[
        "eval",
        "--root", s(&root),
        "--method", "pucd,cva,sfa",
        "--out", s(&out),
        "--workers", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.starts_with("Method"));
    for m in ["pucd", "cva", "sfa"] {
        assert!(table.lines().any(|l| l.starts_with(m)), "{m}");
        assert!(out.join("masks").join(m).join("scene_001.png").is_file());
    }
    assert!(out.join("metrics.json").is_file());
}

#[test]
fn eval_rejects_unknown_methods() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 1);
    let o = run(&["eval", "--root", s(dir.path()), "--method", "magic"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("magic"));
}
