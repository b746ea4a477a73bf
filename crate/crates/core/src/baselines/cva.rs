use super::{otsu_threshold, ScoreMap};
use crate::error::{Error, Result};
use crate::raster::{ChangeMask, ImagePair};

/// Per-pixel Euclidean norm of `post - pre` over bands.
pub fn cva_scores(pair: &ImagePair) -> Result<ScoreMap> {
    let (pre, post) = (pair.pre().pixels(), pair.post().pixels());
    let b = pair.bands();
    let scores = pre
        .chunks_exact(b)
        .zip(post.chunks_exact(b))
        .map(|(p, q)| {
            p.iter()
                .zip(q)
                .map(|(&x, &y)| {
                    let d = y as f64 - x as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    ScoreMap::new(pair.width(), pair.height(), scores)
}

pub(crate) fn cva_scores_and_mask(pair: &ImagePair) -> Result<(ScoreMap, ChangeMask)> {
    let scores = cva_scores(pair)?;
    let mask = match otsu_threshold(&scores, 256) {
        Ok(cut) => cut.apply(&scores),
        Err(Error::ConstantScores) if scores.scores().iter().all(|&s| s == 0.0) => {
            ChangeMask::zeros(pair.width(), pair.height())
        }
        Err(e) => return Err(e),
    };
    Ok((scores, mask))
}

/// Change vector magnitude binarized with Otsu's threshold. An identical pair
/// yields an all-unchanged mask.
pub fn cva_baseline(pair: &ImagePair) -> Result<ChangeMask> {
    cva_scores_and_mask(pair).map(|(_, m)| m)
}
