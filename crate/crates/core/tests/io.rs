use protochange::dataset::{load_dataset, scan_dataset};
use protochange::raster::{
    load_image, load_pair, resize_to_patch_multiple, save_image, BitDepth, ChangeMask, GeoRef, RasterImage,
};
use protochange::refine::{load_segments, SegmentMap};
use protochange::Error;

fn ramp(w: usize, h: usize, bands: usize) -> RasterImage {
    RasterImage::from_fn(w, h, bands, |x, y, b| ((x * 3 + y * 5 + b * 7) % 256) as f32 / 255.0).unwrap()
}

#[test]
fn gray_png_max_value_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.png");
    image::GrayImage::from_raw(2, 2, vec![0, 255, 128, 0]).unwrap().save(&path).unwrap();
    let img = load_image(&path).unwrap();
    assert_eq!((img.width(), img.height(), img.bands()), (2, 2, 1));
    assert_eq!(img.get(1, 0, 0), 1.0);
    assert_eq!(img.get(0, 0, 0), 0.0);
}

#[test]
fn missing_file_is_reported() {
    let err = load_image("/nonexistent/x.png").unwrap_err();
    assert!(matches!(err, Error::MissingFile(p) if p.ends_with("x.png")));
}

#[test]
fn garbage_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.png");
    std::fs::write(&path, b"not an image at all").unwrap();
    assert!(matches!(load_image(&path), Err(Error::UnsupportedFormat(_))));
}

#[test]
fn png_round_trips_at_both_depths() {
    let dir = tempfile::tempdir().unwrap();
    let img = ramp(17, 9, 3);
    for (depth, name) in [(BitDepth::Eight, "a8.png"), (BitDepth::Sixteen, "a16.png")] {
        let path = dir.path().join(name);
        save_image(&img, &path, depth).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.pixels(), img.pixels());
    }
}

#[test]
fn geotiff_keeps_pixels_and_georeference() {
    let dir = tempfile::tempdir().unwrap();
    let geo = GeoRef {
        transform: [500000.0, 0.5, 0.0, 4100000.0, 0.0, -0.5],
        geo_keys: Some(vec![1, 1, 0, 1, 3072, 0, 1, 32652]),
    };
    let img = ramp(12, 8, 3).with_geo(Some(geo.clone()));
    let path = dir.path().join("scene.tif");
    save_image(&img, &path, BitDepth::Sixteen).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!(back.pixels(), img.pixels());
    assert_eq!(back.geo(), Some(&geo));
    assert_eq!(back.geo().unwrap().epsg(), Some(32652));

    let mask = ChangeMask::from_fn(12, 8, |x, y| x > y);
    let mpath = dir.path().join("mask.tif");
    mask.save(&mpath, back.geo()).unwrap();
    assert_eq!(ChangeMask::load(&mpath).unwrap(), mask);
    assert_eq!(load_image(&mpath).unwrap().geo(), Some(&geo));
}

#[test]
fn mask_file_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mask = ChangeMask::from_fn(31, 17, |x, y| (x * y) % 3 == 0);
    let p1 = dir.path().join("m1.png");
    let p2 = dir.path().join("m2.png");
    mask.save(&p1, None).unwrap();
    let loaded = ChangeMask::load(&p1).unwrap();
    assert_eq!(loaded, mask);
    loaded.save(&p2, None).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn pair_dimensions_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    save_image(&ramp(256, 256, 3), &a, BitDepth::Eight).unwrap();
    save_image(&ramp(128, 128, 3), &b, BitDepth::Eight).unwrap();
    assert!(matches!(load_pair(&a, &b), Err(Error::DimensionMismatch(_))));
    save_image(&ramp(256, 256, 3), &b, BitDepth::Eight).unwrap();
    let pair = load_pair(&a, &b).unwrap();
    assert_eq!((pair.width(), pair.height(), pair.bands()), (256, 256, 3));
}

#[test]
fn resize_to_patch_multiple_examples() {
    let img = RasterImage::filled(1024, 1024, 3, 0.5).unwrap();
    let r = resize_to_patch_multiple(&img, 14);
    assert_eq!((r.width(), r.height()), (1022, 1022));
    let small = RasterImage::filled(13, 13, 1, 0.5).unwrap();
    let r = resize_to_patch_multiple(&small, 14);
    assert_eq!((r.width(), r.height()), (14, 14));
}

fn write_triple(root: &std::path::Path, name: &str, label: bool) {
    let img = ramp(20, 20, 3);
    save_image(&img, root.join("A").join(name), BitDepth::Eight).unwrap();
    save_image(&img, root.join("B").join(name), BitDepth::Eight).unwrap();
    if label {
        ChangeMask::zeros(20, 20).save(root.join("label").join(name), None).unwrap();
    }
}

#[test]
fn dataset_lists_matched_triples_in_order() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["c.png", "a.png", "b.png"] {
        write_triple(dir.path(), name, true);
    }
    let samples = load_dataset(dir.path()).unwrap();
    let ids: Vec<_> = samples.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
    assert!(samples.iter().all(|s| s.label.is_some()));
    assert_eq!(scan_dataset(dir.path()).unwrap(), scan_dataset(dir.path()).unwrap());
}

#[test]
fn dataset_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(scan_dataset(dir.path()), Err(Error::EmptyDataset(_))));
    write_triple(dir.path(), "a.png", false);
    save_image(&ramp(20, 20, 3), dir.path().join("A/extra.png"), BitDepth::Eight).unwrap();
    match scan_dataset(dir.path()) {
        Err(Error::UnmatchedFile(msg)) => assert!(msg.contains("extra.png")),
        other => panic!("expected UnmatchedFile, got {other:?}"),
    }
}

#[test]
fn dataset_picks_up_prototype_masks() {
    let dir = tempfile::tempdir().unwrap();
    write_triple(dir.path(), "a.png", true);
    write_triple(dir.path(), "b.png", true);
    ChangeMask::from_fn(20, 20, |x, _| x < 5).save(dir.path().join("prototype/b.png"), None).unwrap();
    let entries = scan_dataset(dir.path()).unwrap();
    assert!(entries[0].prototype.is_none());
    assert!(entries[1].prototype.as_ref().unwrap().ends_with("prototype/b.png"));
}

#[test]
fn segment_files_relabel_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seg.png");
    let raw: Vec<u16> = (0..40 * 30)
        .map(|i| {
            let (x, y) = (i % 40, i / 40);
            if x < 10 && y < 10 {
                7
            } else if x >= 30 && y >= 20 {
                9
            } else if (15..20).contains(&x) {
                300
            } else {
                0
            }
        })
        .collect();
    image::ImageBuffer::<image::Luma<u16>, _>::from_raw(40, 30, raw).unwrap().save(&path).unwrap();

    let seg = load_segments(&path, 40, 30).unwrap();
    assert_eq!(seg.segment_count(), 3);
    assert_eq!((seg.get(0, 0), seg.get(15, 0), seg.get(39, 29), seg.get(25, 0)), (1, 2, 3, 0));
    assert_eq!((seg.size_of(1), seg.size_of(2), seg.size_of(3)), (100, 150, 100));
    assert!(matches!(load_segments(&path, 41, 30), Err(Error::DimensionMismatch(_))));

    let out = dir.path().join("again.png");
    seg.save(&out).unwrap();
    assert_eq!(load_segments(&out, 40, 30).unwrap(), seg);
    let direct = SegmentMap::from_raw(3, 1, &[0, 7, 9]).unwrap();
    assert_eq!(direct.labels(), &[0, 1, 2]);
}
