//! Cuts a prototype out of the post image, pastes it into both epochs and
//! shows which patch cells it votes with. Also places an external chip.
//!
//! `cargo run --example prototype_synthesis`

use protochange::features::patch_grid;
use protochange::prototype::{
    prototype_cells, select_prototype_manual, synthesize_pair, Anchor, Prototype, PrototypeSource,
};
use protochange::raster::{ChangeMask, RasterImage};
use protochange::synthetic::{generate_scene, SceneParams};

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SceneParams { width: 252, height: 252, ..Default::default() });
    let (w, h) = (scene.pair.width(), scene.pair.height());

    let proto = select_prototype_manual(
        scene.pair.post(),
        &scene.change_mask(0),
        Anchor::new(0, 0),
        PrototypeSource::Post,
    )?;
    println!(
        "chip {}x{} at {:?}, {} mask pixels",
        proto.chip().width(),
        proto.chip().height(),
        proto.anchor(),
        proto.mask_pixels()
    );

    let synth = synthesize_pair(&scene.pair, &proto)?;
    let footprint = proto.footprint(w, h)?;
    let mut moved = 0;
    for y in 0..h {
        for x in 0..w {
            if synth.synth_pre.pixel(x, y) != scene.pair.pre().pixel(x, y) {
                moved += 1;
                assert!(footprint.get(x, y));
            }
        }
    }
    println!("synthetic pre differs from pre in {moved} pixels, all inside the footprint");

    let grid = patch_grid(w, h, 14)?;
    let cells = prototype_cells(&proto, &grid, 0.5);
    let rc: Vec<_> = cells.iter().map(|&i| grid.cell(i)).collect();
    println!("voting cells (row, col): {rc:?}");

    // A 20x20 disc from outside the scene, placed at a chosen anchor.
    let chip = RasterImage::filled(20, 20, 3, 0.9)?;
    let mask = ChangeMask::from_fn(20, 20, |x, y| {
        let (dx, dy) = (x as f64 - 9.5, y as f64 - 9.5);
        dx * dx + dy * dy <= 100.0
    });
    let ext = Prototype::external(chip, mask, Some(Anchor::new(200, 30)), w, h)?;
    println!(
        "external chip with {} mask pixels covers {} cells above 50%",
        ext.mask_pixels(),
        prototype_cells(&ext, &grid, 0.5).len()
    );
    Ok(())
}
