//! Runs CVA, PCA-KMeans, IRMAD and SFA on one synthetic pair.
//!
//! `cargo run --release --example baselines`

use protochange::baselines::{irmad_baseline, run_baseline, sfa_baseline, BaselineMethod, BaselineParams};
use protochange::metrics::{class_metrics, confusion};
use protochange::synthetic::{generate_scene, SceneParams};

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SceneParams::default());
    let params = BaselineParams::default();

    for method in BaselineMethod::ALL {
        let out = run_baseline(method, &scene.pair, &params)?;
        let m = class_metrics(&confusion(&out.mask, &scene.label)?)?;
        println!(
            "{:<10} changed {:>6} px  F1(change) {:.3}  IoU(change) {:.3}",
            method.name(),
            out.mask.count_changed(),
            m.f1_1,
            m.iou1
        );
    }

    let irmad = irmad_baseline(&scene.pair, &params.irmad)?;
    println!(
        "irmad: {} iterations, converged {}, final |Δρ| {:.2e}, χ² threshold {:.2}",
        irmad.iterations, irmad.converged, irmad.final_delta, irmad.threshold
    );
    println!("  canonical correlations {:?}", irmad.cca.rho);

    let sfa = sfa_baseline(&scene.pair, &params.sfa)?;
    println!(
        "sfa: eigenvalues {:?}, retained {:?}",
        sfa.model.eigenvalues, sfa.model.retained
    );
    Ok(())
}
