use protochange::features::patch_grid;
use protochange::prototype::{
    prototype_cells, select_prototype_manual, select_prototype_random, synthesize_pair, Anchor, Prototype,
    PrototypeSource,
};
use protochange::raster::{ChangeMask, ImagePair, RasterImage};
use protochange::refine::{builtin_segments, refine, refine_with_stats, SegmentMap};
use protochange::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RasterImage::from_fn(w, h, 3, |_, _, _| rng.random::<f32>()).unwrap()
}

#[test]
fn manual_prototype_from_region() {
    let img = noise(64, 48, 1);
    let mask = ChangeMask::from_fn(64, 48, |x, y| (10..30).contains(&x) && (5..35).contains(&y));
    let p = select_prototype_manual(&img, &mask, Anchor::new(0, 0), PrototypeSource::Pre).unwrap();
    assert_eq!((p.chip().width(), p.chip().height()), (20, 30));
    assert_eq!(p.mask_pixels(), mask.count_changed());
    assert_eq!(p.anchor(), Anchor::new(5, 10));
    assert_eq!(p.chip().pixel(0, 0), img.pixel(10, 5));
    assert!(matches!(
        select_prototype_manual(&img, &ChangeMask::zeros(64, 48), Anchor::new(0, 0), PrototypeSource::Pre),
        Err(Error::EmptyMask)
    ));
}

#[test]
fn composite_changes_only_the_footprint() {
    let pair = ImagePair::new(noise(70, 56, 2), noise(70, 56, 3)).unwrap();
    let mask = ChangeMask::from_fn(70, 56, |x, y| {
        let (dx, dy) = (x as f64 - 30.0, y as f64 - 20.0);
        dx * dx + dy * dy < 120.0
    });
    let p = select_prototype_manual(pair.pre(), &mask, Anchor::new(0, 0), PrototypeSource::Pre).unwrap();
    let s = synthesize_pair(&pair, &p).unwrap();
    assert_eq!(s.synth_pre, *pair.pre());
    for y in 0..56 {
        for x in 0..70 {
            let inside = mask.get(x, y);
            assert_eq!(s.synth_post.pixel(x, y) != pair.post().pixel(x, y), inside);
            if inside {
                assert_eq!(s.synth_post.pixel(x, y), pair.pre().pixel(x, y));
            }
        }
    }
}

#[test]
fn external_chip_is_centred_by_default() {
    let scene = noise(60, 40, 4);
    let chip = RasterImage::filled(10, 8, 3, 1.0).unwrap();
    let mask = ChangeMask::from_fn(10, 8, |x, _| x % 2 == 0);
    let p = Prototype::external(chip, mask.clone(), None, 60, 40).unwrap();
    assert_eq!(p.anchor(), Anchor::new(16, 25));
    let out = p.composite(&scene).unwrap();
    for y in 0..40 {
        for x in 0..60 {
            let inside = (25..35).contains(&x) && (16..24).contains(&y) && mask.get(x - 25, y - 16);
            if inside {
                assert_eq!(out.pixel(x, y), &[1.0, 1.0, 1.0]);
            } else {
                assert_eq!(out.pixel(x, y), scene.pixel(x, y));
            }
        }
    }
    let big = RasterImage::filled(61, 8, 3, 1.0).unwrap();
    assert!(matches!(
        Prototype::external(big, ChangeMask::from_fn(61, 8, |_, _| true), None, 60, 40),
        Err(Error::OutOfBounds(_))
    ));
    let anchored = RasterImage::filled(10, 8, 3, 1.0).unwrap();
    assert!(Prototype::external(anchored, mask, Some(Anchor::new(35, 0)), 60, 40).is_err());
}

#[test]
fn random_selection_is_uniform_over_segments() {
    let img = noise(50, 10, 5);
    let raw: Vec<u32> = (0..500).map(|i| (i % 50 / 10) as u32 + 1).collect();
    let seg = SegmentMap::from_raw(50, 10, &raw).unwrap();
    let mut counts = [0usize; 5];
    for seed in 0..10_000u64 {
        let p = select_prototype_random(&seg, &img, seed, PrototypeSource::Post).unwrap();
        counts[p.segment().unwrap() as usize - 1] += 1;
    }
    for c in counts {
        assert!((1800..=2200).contains(&c), "{counts:?}");
    }
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - 2000.0).powi(2) / 2000.0).sum();
    // 0.999 quantile of chi-square with 4 degrees of freedom.
    assert!(chi2 < 18.47, "chi2 = {chi2}");

    let a = select_prototype_random(&seg, &img, 99, PrototypeSource::Post).unwrap();
    assert_eq!(a, select_prototype_random(&seg, &img, 99, PrototypeSource::Post).unwrap());

    let single = SegmentMap::from_raw(50, 10, &[4; 500]).unwrap();
    for seed in 0..5 {
        assert_eq!(select_prototype_random(&single, &img, seed, PrototypeSource::Pre).unwrap().segment(), Some(1));
    }
    let empty = SegmentMap::from_raw(50, 10, &[0; 500]).unwrap();
    assert!(matches!(select_prototype_random(&empty, &img, 0, PrototypeSource::Pre), Err(Error::NoSegments)));
}

#[test]
fn prototype_cell_examples() {
    let img = noise(56, 56, 6);
    let grid = patch_grid(56, 56, 14).unwrap();
    let square = |n: usize| ChangeMask::from_fn(56, 56, |x, y| x < n && y < n);
    let cells = |m: &ChangeMask, cov: f64| {
        let p = select_prototype_manual(&img, m, Anchor::new(0, 0), PrototypeSource::Post).unwrap();
        prototype_cells(&p, &grid, cov)
    };
    assert_eq!(cells(&square(14), 0.5), vec![0]);
    assert_eq!(cells(&square(28), 0.5), vec![0, 1, 4, 5]);
    // 14 x 5 = 70 px, 35.7% of one cell.
    let sliver = ChangeMask::from_fn(56, 56, |x, y| x < 14 && y < 5);
    assert!(cells(&sliver, 0.5).is_empty());
    assert_eq!(cells(&sliver, 0.3), vec![0]);
}

/// 100-pixel segment with `inside` pixels covered by the coarse mask.
fn overlap_fixture(inside: usize) -> (ChangeMask, SegmentMap) {
    let raw: Vec<u32> = (0..200).map(|i| if i < 100 { 1 } else { 2 }).collect();
    let seg = SegmentMap::from_raw(20, 10, &raw).unwrap();
    let coarse = ChangeMask::from_fn(20, 10, |x, y| y * 20 + x < inside);
    (coarse, seg)
}

#[test]
fn overlap_threshold_is_strict() {
    let (coarse, seg) = overlap_fixture(70);
    assert_eq!(refine(&coarse, &seg, 0.7).unwrap().count_changed(), 0);
    let (coarse, seg) = overlap_fixture(71);
    let out = refine(&coarse, &seg, 0.7).unwrap();
    assert_eq!(out.count_changed(), 100);
    assert!((0..100).all(|i| out.get(i % 20, i / 20)));
    let (coarse, seg) = overlap_fixture(100);
    let (out, stats) = refine_with_stats(&coarse, &seg, 0.7).unwrap();
    assert_eq!((out.count_changed(), stats.retained, stats.segments), (100, 1, 2));
}

#[test]
fn builtin_segmenter_examples() {
    assert_eq!(builtin_segments(&RasterImage::filled(40, 30, 3, 0.3).unwrap(), 8, 32).segment_count(), 1);
    let halves = RasterImage::from_fn(40, 30, 1, |x, _, _| if x < 20 { 0.1 } else { 0.9 }).unwrap();
    assert_eq!(builtin_segments(&halves, 8, 32).segment_count(), 2);
    let quads = RasterImage::from_fn(128, 128, 1, |x, y, _| if (x < 64) ^ (y < 64) { 0.9 } else { 0.1 }).unwrap();
    let seg = builtin_segments(&quads, 8, 32);
    assert_eq!(seg.segment_count(), 4);
    for id in 1..=4 {
        assert_eq!(seg.size_of(id), 64 * 64);
    }
}
