use std::path::PathBuf;

use protochange::features::{
    extract_features, feature_difference, patch_grid, FeatureBackend, FeatureMap, PatchEmbedder, PatchStatistics,
};
use protochange::{Error, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn probe_image(w: usize, h: usize) -> RasterImage {
    RasterImage::from_fn(w, h, 3, |x, y, b| ((x * 7 + y * 13 + b * 5) % 256) as f32 / 255.0).unwrap()
}

#[derive(serde::Deserialize)]
struct Probe {
    height: usize,
    width: usize,
    shape: Vec<usize>,
    tokens: Vec<f32>,
}

#[test]
fn onnx_tokens_match_reference_runtime() {
    let probe: Probe =
        serde_json::from_str(&std::fs::read_to_string(fixture("patch_embed_d8_probe.json")).unwrap()).unwrap();
    let backend = FeatureBackend::Neural { model: fixture("patch_embed_d8.onnx") };
    let f = extract_features(&probe_image(probe.width, probe.height), &backend).unwrap();
    assert_eq!((f.grid().rows, f.grid().cols, f.dim()), (2, 3, 8));
    assert_eq!(probe.shape, [1, 6, 8]);
    for (got, want) in f.data().iter().zip(&probe.tokens) {
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn onnx_is_deterministic_and_rejects_non_multiples() {
    let e = FeatureBackend::Neural { model: fixture("patch_embed_d8.onnx") }.open().unwrap();
    let img = probe_image(56, 42);
    assert_eq!(e.extract(&img).unwrap(), e.extract(&img).unwrap());
    assert_eq!(e.dim(), 8);
    let err = e.extract(&probe_image(50, 42)).unwrap_err();
    assert!(matches!(err, Error::NotMultiple { width: 50, height: 42, patch: 14 }));
}

#[test]
fn unreadable_model_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("broken.onnx");
    std::fs::write(&bogus, b"\x00\x01garbage").unwrap();
    for path in [bogus, dir.path().join("absent.onnx")] {
        match (FeatureBackend::Neural { model: path.clone() }).open() {
            Err(Error::ModelLoadFailure { path: p, .. }) => assert_eq!(p, path),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("expected ModelLoadFailure"),
        }
    }
}

#[test]
fn patch_grid_examples() {
    let g = patch_grid(1022, 1022, 14).unwrap();
    assert_eq!((g.rows, g.cols), (73, 73));
    let g = patch_grid(42, 28, 14).unwrap();
    assert_eq!((g.rows, g.cols), (2, 3));
    let g = patch_grid(14, 14, 14).unwrap();
    assert_eq!(g.cells(), 1);
}

#[test]
fn statistics_backend_is_deterministic() {
    let img = probe_image(70, 42);
    let backend = FeatureBackend::PatchStatistics { dim: 16 };
    assert_eq!(extract_features(&img, &backend).unwrap(), extract_features(&img, &backend).unwrap());
}

#[test]
fn statistics_follow_a_one_patch_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let wide = RasterImage::from_fn(84, 42, 3, |_, _, _| rng.random::<f32>()).unwrap();
    let shifted = RasterImage::from_fn(70, 42, 3, |x, y, b| wide.get(x + 14, y, b)).unwrap();
    let e = PatchStatistics::new(16).unwrap();
    let (a, b) = (e.extract(&wide).unwrap(), e.extract(&shifted).unwrap());
    for r in 0..3 {
        for c in 0..5 {
            assert_eq!(b.at(r, c), a.at(r, c + 1));
        }
    }
}

#[test]
fn difference_matches_elementwise_enumeration() {
    let grid = patch_grid(28, 28, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut random_map = || FeatureMap::new(grid, 3, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let (a, b) = (random_map(), random_map());
    let d = feature_difference(&a, &b).unwrap();
    let back = feature_difference(&b, &a).unwrap();
    for cell in 0..4 {
        for k in 0..3 {
            assert_eq!(d.cell(cell)[k], b.cell(cell)[k] - a.cell(cell)[k]);
            assert_eq!(back.cell(cell)[k], -d.cell(cell)[k]);
        }
    }
    assert_eq!(d.cell_norms(), back.cell_norms());
    assert!(feature_difference(&a, &a).unwrap().data().iter().all(|&v| v == 0.0));

    let other = FeatureMap::new(patch_grid(42, 28, 14).unwrap(), 3, vec![0.0; 18]).unwrap();
    assert!(matches!(feature_difference(&a, &other), Err(Error::ShapeMismatch(_))));
}

#[test]
fn non_finite_tokens_are_rejected() {
    let grid = patch_grid(14, 14, 14).unwrap();
    assert!(matches!(FeatureMap::new(grid, 2, vec![0.0, f32::NAN]), Err(Error::ShapeMismatch(_))));
    assert!(matches!(FeatureMap::new(grid, 2, vec![f32::INFINITY, 0.0]), Err(Error::ShapeMismatch(_))));
}
