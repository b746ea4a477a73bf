//! The patch-level core of the detector, step by step: feature differences,
//! change vectors, PCA, k-means and the prototype vote.
//!
//! `cargo run --example cva_clustering`

use protochange::cva::{build_change_vectors, coarse_map, kmeans, pca_fit_transform, upsample, vote_change_cluster, KMeansParams};
use protochange::features::{feature_difference, PatchEmbedder, PatchStatistics};
use protochange::prototype::{prototype_cells, select_prototype_manual, synthesize_pair, Anchor, PrototypeSource};
use protochange::synthetic::{generate_scene, SceneParams};

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SceneParams { width: 252, height: 252, ..Default::default() });
    let pair = &scene.pair;
    let proto = select_prototype_manual(pair.post(), &scene.change_mask(0), Anchor::new(0, 0), PrototypeSource::Post)?;
    let synth = synthesize_pair(pair, &proto)?;

    let embedder = PatchStatistics::new(16)?;
    let f1 = embedder.extract(pair.pre())?;
    let f2 = embedder.extract(pair.post())?;
    let g1 = embedder.extract(&synth.synth_pre)?;
    let g2 = embedder.extract(&synth.synth_post)?;
    let s21 = feature_difference(&f1, &f2)?;
    let s11 = feature_difference(&f1, &g1)?;
    let s22 = feature_difference(&f2, &g2)?;

    let vectors = build_change_vectors(&s21, &s11, &s22)?;
    println!("{} change vectors of dimension {}", vectors.n(), vectors.dim());

    let (pca, proj) = pca_fit_transform(vectors.matrix(), 1)?;
    println!("first component explains {:.1}% of the variance", 100.0 * pca.explained_variance_ratio()[0]);

    let km = kmeans(&proj, &KMeansParams::default(), 42)?;
    println!(
        "k-means: {} iterations, inertia {:.4}, sizes {:?}",
        km.iterations,
        km.inertia,
        km.cluster_sizes()
    );

    let cells = prototype_cells(&proto, &s21.grid(), 0.5);
    let tally = vote_change_cluster(&km.labels, &cells, &s21)?;
    println!("votes {:?}, mean ‖s21‖ {:?} -> change cluster {}", tally.votes, tally.mean_s21, tally.change_cluster);

    let coarse = coarse_map(&km.labels, tally.change_cluster, s21.grid())?;
    let grid = s21.grid();
    for r in 0..grid.rows {
        let row: String = (0..grid.cols).map(|c| if coarse.is_changed(r, c) { '#' } else { '.' }).collect();
        println!("{row}");
    }
    println!("{} px flagged after upsampling", upsample(&coarse).count_changed());
    Ok(())
}
