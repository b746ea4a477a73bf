mod common;

use common::{is_subset as subset, is_union_of_segments};
use proptest::collection::vec;
use proptest::prelude::*;

use protochange::baselines::otsu_values;
use protochange::features::{feature_difference, patch_grid, FeatureMap};
use protochange::metrics::{class_metrics, confusion};
use protochange::prototype::{prototype_cells, select_prototype_manual, Anchor, PrototypeSource};
use protochange::raster::resize_to_patch_multiple;
use protochange::refine::{refine, segment_overlaps, SegmentMap};
use protochange::{ChangeMask, RasterImage};

fn mask_strategy(max: usize) -> impl Strategy<Value = ChangeMask> {
    (1..max, 1..max).prop_flat_map(|(w, h)| {
        vec(any::<bool>(), w * h).prop_map(move |bits| ChangeMask::from_fn(w, h, |x, y| bits[y * w + x]))
    })
}

fn mask_pair(max: usize) -> impl Strategy<Value = (ChangeMask, ChangeMask)> {
    (1..max, 1..max).prop_flat_map(|(w, h)| {
        (vec(any::<bool>(), w * h), vec(any::<bool>(), w * h)).prop_map(move |(a, b)| {
            (ChangeMask::from_fn(w, h, |x, y| a[y * w + x]), ChangeMask::from_fn(w, h, |x, y| b[y * w + x]))
        })
    })
}

/// A coarse mask with a segment map of the same size; label 0 is unsegmented.
fn refine_case() -> impl Strategy<Value = (ChangeMask, SegmentMap)> {
    (2usize..24, 2usize..24).prop_flat_map(|(w, h)| {
        (vec(any::<bool>(), w * h), vec(0u32..6, w * h)).prop_map(move |(bits, raw)| {
            (ChangeMask::from_fn(w, h, |x, y| bits[y * w + x]), SegmentMap::from_raw(w, h, &raw).unwrap())
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_png_round_trip(mask in mask_strategy(40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        mask.save(&path, None).unwrap();
        prop_assert_eq!(ChangeMask::load(&path).unwrap(), mask);
    }

    #[test]
    fn resizing_a_patch_multiple_is_identity(rows in 1usize..4, cols in 1usize..4, bands in 1usize..4, seed in any::<u32>()) {
        let (w, h) = (cols * 14, rows * 14);
        let img = RasterImage::from_fn(w, h, bands, |x, y, b| ((x * 31 + y * 17 + b * 7 + seed as usize) % 97) as f32 / 96.0).unwrap();
        let out = resize_to_patch_multiple(&img, 14);
        prop_assert_eq!(out.pixels(), img.pixels());
        let again = resize_to_patch_multiple(&out, 14);
        prop_assert_eq!(again.pixels(), img.pixels());
    }

    #[test]
    fn resized_sides_are_patch_multiples(w in 1usize..80, h in 1usize..80) {
        let out = resize_to_patch_multiple(&RasterImage::filled(w, h, 1, 0.5).unwrap(), 14);
        prop_assert!(out.width().is_multiple_of(14) && out.height().is_multiple_of(14));
        prop_assert!(out.width().abs_diff(w) <= 7 || w < 14);
        prop_assert!(out.pixels().iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn difference_is_antisymmetric(a in vec(-10.0f32..10.0, 24), b in vec(-10.0f32..10.0, 24)) {
        let grid = patch_grid(42, 28, 14).unwrap();
        let fa = FeatureMap::new(grid, 4, a).unwrap();
        let fb = FeatureMap::new(grid, 4, b).unwrap();
        let ab = feature_difference(&fa, &fb).unwrap();
        let ba = feature_difference(&fb, &fa).unwrap();
        for (x, y) in ab.data().iter().zip(ba.data()) {
            prop_assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn composite_touches_only_the_footprint(mask in mask_strategy(20), ox in 0usize..10, oy in 0usize..10) {
        prop_assume!(mask.count_changed() > 0);
        let (w, h) = (30, 30);
        let src = RasterImage::from_fn(w, h, 2, |x, y, b| ((x + 2 * y + b) % 5) as f32 / 5.0 + 0.1).unwrap();
        let scene = RasterImage::filled(w, h, 2, 0.0).unwrap();
        let p = select_prototype_manual(&src, &mask, Anchor::new(oy, ox), PrototypeSource::Post).unwrap();
        let out = p.composite(&scene).unwrap();
        let fp = p.footprint(w, h).unwrap();
        prop_assert_eq!(fp.count_changed(), mask.count_changed());
        for y in 0..h {
            for x in 0..w {
                if fp.get(x, y) {
                    prop_assert_eq!(out.pixel(x, y), src.pixel(x, y));
                } else {
                    prop_assert_eq!(out.pixel(x, y), scene.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn prototype_cells_shrink_with_coverage(mask in mask_strategy(42), c1 in 0.0f64..1.0, c2 in 0.0f64..1.0) {
        prop_assume!(mask.count_changed() > 0);
        let src = RasterImage::filled(42, 42, 1, 0.3).unwrap();
        let p = select_prototype_manual(&src, &mask, Anchor::new(0, 0), PrototypeSource::Post).unwrap();
        let grid = patch_grid(42, 42, 14).unwrap();
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let loose = prototype_cells(&p, &grid, lo);
        let strict = prototype_cells(&p, &grid, hi);
        prop_assert!(strict.iter().all(|c| loose.contains(c)));
    }

    #[test]
    fn refinement_is_a_union_of_segments((coarse, seg) in refine_case(), t in 0.0f64..1.0) {
        let out = refine(&coarse, &seg, t).unwrap();
        prop_assert!(is_union_of_segments(&out, &seg));
        let overlaps = segment_overlaps(&coarse, &seg).unwrap();
        for y in 0..seg.height() {
            for x in 0..seg.width() {
                let id = seg.get(x, y);
                if id != 0 {
                    prop_assert_eq!(out.get(x, y), overlaps[id as usize - 1] > t);
                }
            }
        }
    }

    #[test]
    fn refinement_shrinks_as_threshold_grows((coarse, seg) in refine_case(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(subset(&refine(&coarse, &seg, hi).unwrap(), &refine(&coarse, &seg, lo).unwrap()));
    }

    #[test]
    fn refinement_threshold_extremes((coarse, seg) in refine_case(), above in 1.0f64..3.0) {
        prop_assert_eq!(refine(&coarse, &seg, above).unwrap().count_changed(), 0);
        let touched = refine(&coarse, &seg, 0.0).unwrap();
        for y in 0..seg.height() {
            for x in 0..seg.width() {
                let id = seg.get(x, y);
                let hit = id != 0 && (0..seg.height()).any(|yy| (0..seg.width()).any(|xx| seg.get(xx, yy) == id && coarse.get(xx, yy)));
                prop_assert_eq!(touched.get(x, y), hit);
            }
        }
    }

    #[test]
    fn confusion_swaps_errors_with_arguments((a, b) in mask_pair(30)) {
        let ab = confusion(&a, &b).unwrap();
        let ba = confusion(&b, &a).unwrap();
        prop_assert_eq!((ab.tp, ab.fp, ab.fn_, ab.tn), (ba.tp, ba.fn_, ba.fp, ba.tn));
        let m = class_metrics(&ab).unwrap();
        prop_assert_eq!(m.acc, (ab.tp + ab.tn) as f64 / ab.total() as f64);
        prop_assert_eq!(ab.total() as usize, a.width() * a.height());
    }

    #[test]
    fn otsu_cut_separates_by_bin(values in vec(0.0f64..100.0, 2..300)) {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(max > min);
        let cut = otsu_values(&values, 256).unwrap();
        prop_assert!(cut.threshold >= min && cut.threshold <= max);
        prop_assert!(values.iter().any(|&v| cut.is_above(v)));
        prop_assert!(values.iter().any(|&v| !cut.is_above(v)));
        for &v in &values {
            prop_assert_eq!(cut.is_above(v), cut.bin_of(v) >= cut.cut_bin);
        }
    }
}
