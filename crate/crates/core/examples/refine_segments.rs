//! Snaps a blocky change map to image segments.
//!
//! `cargo run --example refine_segments`

use protochange::raster::ChangeMask;
use protochange::refine::{builtin_segments, load_segments, refine_with_stats, segment_overlaps};
use protochange::synthetic::{generate_scene, SceneParams};

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SceneParams::default());
    let (w, h) = (scene.pair.width(), scene.pair.height());
    let segments = builtin_segments(scene.pair.post(), 8, 32);
    println!("{} segments in the post image", segments.segment_count());

    // Dilate the true change to the 14-px block grid, as a coarse map would.
    let coarse = ChangeMask::from_fn(w, h, |x, y| {
        let (bx, by) = (x / 14 * 14, y / 14 * 14);
        (by..(by + 14).min(h)).any(|yy| (bx..(bx + 14).min(w)).any(|xx| scene.label.get(xx, yy)))
    });

    for threshold in [0.5, 0.7, 0.9] {
        let (refined, stats) = refine_with_stats(&coarse, &segments, threshold)?;
        let extra = (0..w * h)
            .filter(|&i| refined.get(i % w, i / w) && !scene.label.get(i % w, i / w))
            .count();
        println!(
            "threshold {threshold}: kept {} of {} segments, {} px ({} outside the truth); coarse had {} px",
            stats.retained,
            stats.segments,
            stats.retained_pixels,
            extra,
            coarse.count_changed()
        );
    }

    let overlaps = segment_overlaps(&coarse, &segments)?;
    let mut top: Vec<(usize, f64)> = overlaps.iter().copied().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (i, o) in top.iter().take(5) {
        println!("segment {} ({} px) overlap {o:.3}", i + 1, segments.size_of(*i as u32 + 1));
    }

    // Segment maps round-trip through 16-bit PNG.
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("segments.png");
    segments.save(&path)?;
    assert_eq!(load_segments(&path, w, h)?, segments);
    println!("round-tripped {}", path.display());
    Ok(())
}
