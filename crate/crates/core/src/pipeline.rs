//! End-to-end prototype-guided detection.
//!
//! resize → synthesize → extract ×4 → differences → concatenate → PCA →
//! k-means → prototype vote → coarse map → upsample → segment refinement.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, PrototypeSpec, RefineSource, SegmentProvider};
use crate::cva::{
    build_change_vectors, coarse_map, kmeans, pca_fit_transform, upsample, CoarseChangeMap,
    VoteTally,
};
use crate::error::{Error, Result, StageExt};
use crate::features::{feature_difference, PatchEmbedder, PatchGrid, PATCH_SIZE};
use crate::metrics::{class_metrics, confusion, ClassMetrics, ConfusionMatrix};
use crate::prototype::{
    cell_coverage_counts, prototype_cells, select_prototype_manual, select_prototype_random,
    synthesize_pair, Anchor, Prototype, PrototypeSource,
};
use crate::raster::{load_image, resize_to_patch_multiple, ChangeMask, ImagePair, RasterImage};
use crate::refine::{builtin_segments, load_segments, refine_with_stats, RefineStats, SegmentMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeInfo {
    pub source: PrototypeSource,
    pub anchor: Anchor,
    pub chip_width: usize,
    pub chip_height: usize,
    pub mask_pixels: usize,
    pub segment: Option<u32>,
    /// Seed used for random selection, when applicable.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// True when the change vectors had no variance and clustering was skipped.
    pub degenerate: bool,
    pub kmeans_seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub inertia: f64,
    pub cluster_sizes: Vec<usize>,
    pub prototype_cells: Vec<usize>,
    /// Prototype cells were chosen by best coverage because none passed the
    /// coverage threshold.
    pub prototype_cells_fallback: bool,
    pub vote: Option<VoteTally>,
    /// Change-cluster cells dropped because their temporal difference is zero.
    pub static_cells_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineInfo {
    pub threshold: f64,
    pub union_with_coarse: bool,
    pub per_source: BTreeMap<String, RefineStats>,
}

/// Everything needed to audit and replay a detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: BTreeMap<String, String>,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub resized_width: usize,
    pub resized_height: usize,
    pub grid: PatchGrid,
    pub prototype: PrototypeInfo,
    pub clustering: ClusterInfo,
    pub coarse_changed_cells: usize,
    pub coarse_changed_pixels: usize,
    pub refinement: Option<RefineInfo>,
    pub changed_pixels: usize,
    /// Wall-clock seconds per stage; only with `report.timings = true`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<SampleMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub confusion: ConfusionMatrix,
    pub metrics: ClassMetrics,
    pub coarse_confusion: ConfusionMatrix,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rebuilds the configuration this report was produced with.
    pub fn replay_config(&self) -> Result<PipelineConfig> {
        PipelineConfig::from_pairs(&self.config)
    }

    /// Attaches scores against `label` for the final and the coarse mask.
    pub fn attach_metrics(&mut self, det_mask: &ChangeMask, coarse: &ChangeMask, label: &ChangeMask) -> Result<()> {
        let cm = confusion(det_mask, label)?;
        self.metrics = Some(SampleMetrics {
            confusion: cm,
            metrics: class_metrics(&cm)?,
            coarse_confusion: confusion(coarse, label)?,
        });
        Ok(())
    }
}

/// Patch-level intermediates kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Intermediates {
    pub grid: PatchGrid,
    /// `cells x components`, row-major.
    pub projections: Vec<f64>,
    pub components: usize,
    pub labels: Vec<usize>,
    pub coarse: CoarseChangeMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Final mask at the input resolution.
    pub mask: ChangeMask,
    /// Upsampled coarse map at the input resolution, before refinement.
    pub coarse_mask: ChangeMask,
    pub report: RunReport,
    pub intermediates: Intermediates,
}

struct Timer {
    enabled: bool,
    last: Instant,
    laps: BTreeMap<String, f64>,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            last: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        if self.enabled {
            let now = Instant::now();
            self.laps
                .insert(stage.to_string(), (now - self.last).as_secs_f64());
            self.last = now;
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.laps)
    }
}

/// Segment maps for the two epochs at input resolution, computed on demand.
struct Segments<'a> {
    provider: &'a SegmentProvider,
    pair: &'a ImagePair,
    pre: Option<SegmentMap>,
    post: Option<SegmentMap>,
}

impl<'a> Segments<'a> {
    fn new(provider: &'a SegmentProvider, pair: &'a ImagePair) -> Self {
        Self {
            provider,
            pair,
            pre: None,
            post: None,
        }
    }

    fn get(&mut self, source: PrototypeSource) -> Result<&SegmentMap> {
        let is_pre = source == PrototypeSource::Pre;
        let slot = if is_pre { &mut self.pre } else { &mut self.post };
        if slot.is_none() {
            let (w, h) = (self.pair.width(), self.pair.height());
            *slot = Some(match self.provider {
                SegmentProvider::Builtin {
                    quant_levels,
                    min_size,
                } => {
                    let img = if is_pre { self.pair.pre() } else { self.pair.post() };
                    builtin_segments(img, *quant_levels, *min_size)
                }
                SegmentProvider::Files { pre, post } => {
                    let path = if is_pre { pre } else { post };
                    let path = path.as_ref().ok_or_else(|| {
                        Error::Config(format!(
                            "no segment file configured for the {} image",
                            if is_pre { "pre" } else { "post" }
                        ))
                    })?;
                    load_segments(path, w, h)?
                }
            });
        }
        Ok(slot.as_ref().expect("filled above"))
    }
}

fn scene_image(pair: &ImagePair, source: PrototypeSource) -> &RasterImage {
    match source {
        PrototypeSource::Pre => pair.pre(),
        _ => pair.post(),
    }
}

fn build_prototype(
    config: &PipelineConfig,
    resized: &ImagePair,
    segments: &mut Segments,
) -> Result<(Prototype, Option<u64>)> {
    let (rw, rh) = (resized.width(), resized.height());
    match &config.prototype {
        PrototypeSpec::Random { source } => {
            let seed = config.stage_seed("prototype");
            let seg = segments.get(*source)?.resize_nearest(rw, rh);
            let p = select_prototype_random(&seg, scene_image(resized, *source), seed, *source)?;
            Ok((p, Some(seed)))
        }
        PrototypeSpec::Mask { path, source } => {
            let mask = ChangeMask::load(path)?;
            if mask.width() != segments.pair.width() || mask.height() != segments.pair.height() {
                return Err(Error::DimensionMismatch(format!(
                    "prototype mask {}x{} vs scene {}x{}",
                    mask.width(),
                    mask.height(),
                    segments.pair.width(),
                    segments.pair.height()
                )));
            }
            let mask = mask.resize_nearest(rw, rh);
            let p = select_prototype_manual(scene_image(resized, *source), &mask, Anchor::new(0, 0), *source)?;
            Ok((p, None))
        }
        PrototypeSpec::External { chip, mask, anchor } => {
            let chip = load_image(chip)?;
            let mask = ChangeMask::load(mask)?;
            Ok((Prototype::external(chip, mask, *anchor, rw, rh)?, None))
        }
    }
}

/// Opens the configured backend and runs [`detect_with`].
pub fn detect(pair: &ImagePair, config: &PipelineConfig) -> Result<Detection> {
    let embedder = config.backend.open().stage("features")?;
    detect_with(pair, config, embedder.as_ref())
}

/// Runs the pipeline with an already opened embedder.
pub fn detect_with(
    pair: &ImagePair,
    config: &PipelineConfig,
    embedder: &dyn PatchEmbedder,
) -> Result<Detection> {
    let mut timer = Timer::new(config.timings);
    let (w, h) = (pair.width(), pair.height());

    let resized = ImagePair::new(
        resize_to_patch_multiple(pair.pre(), PATCH_SIZE),
        resize_to_patch_multiple(pair.post(), PATCH_SIZE),
    )
    .stage("resize")?;
    let (rw, rh) = (resized.width(), resized.height());
    timer.lap("resize");

    let mut segments = Segments::new(&config.segments, pair);
    let (proto, proto_seed) = build_prototype(config, &resized, &mut segments).stage("prototype")?;
    let synth = synthesize_pair(&resized, &proto).stage("prototype")?;
    timer.lap("prototype");

    let extract = |img: &RasterImage| embedder.extract(img);
    let f1 = extract(resized.pre()).stage("features")?;
    let f2 = extract(resized.post()).stage("features")?;
    let g1 = extract(&synth.synth_pre).stage("features")?;
    let g2 = extract(&synth.synth_post).stage("features")?;
    let s21 = feature_difference(&f1, &f2).stage("features")?;
    let s11 = feature_difference(&f1, &g1).stage("features")?;
    let s22 = feature_difference(&f2, &g2).stage("features")?;
    let grid = s21.grid();
    timer.lap("features");

    let vectors = build_change_vectors(&s21, &s11, &s22).stage("cva")?;
    let kmeans_seed = config.stage_seed("kmeans");
    let mut cells = prototype_cells(&proto, &grid, config.coverage);
    let mut fallback = false;
    if cells.is_empty() {
        let counts = cell_coverage_counts(&proto, &grid);
        let best = (0..counts.len()).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
        if counts.get(best).copied().unwrap_or(0) == 0 {
            return Err(Error::EmptyPrototypeCells).stage("cva");
        }
        cells = vec![best];
        fallback = true;
        log::debug!("no cell passes coverage {}; using cell {best}", config.coverage);
    }

    let mut info = ClusterInfo {
        explained_variance: Vec::new(),
        explained_variance_ratio: Vec::new(),
        degenerate: false,
        kmeans_seed,
        iterations: 0,
        converged: false,
        inertia: 0.0,
        cluster_sizes: Vec::new(),
        prototype_cells: cells.clone(),
        prototype_cells_fallback: fallback,
        vote: None,
        static_cells_dropped: 0,
    };
    let (coarse, projections, labels) = match pca_fit_transform(vectors.matrix(), config.pca_components) {
        Err(Error::DegenerateData) => {
            log::debug!("change vectors have no variance; coarse map is empty");
            info.degenerate = true;
            let labels = vec![0; grid.cells()];
            (coarse_map(&labels, usize::MAX, grid).stage("cva")?, Vec::new(), labels)
        }
        Err(e) => return Err(e).stage("cva"),
        Ok((model, proj)) => {
            info.explained_variance_ratio = model.explained_variance_ratio();
            info.explained_variance = model.explained_variance;
            let km = kmeans(&proj, &config.kmeans, kmeans_seed).stage("cva")?;
            let tally = crate::cva::vote_change_cluster(&km.labels, &cells, &s21).stage("cva")?;
            let mut coarse = coarse_map(&km.labels, tally.change_cluster, grid).stage("cva")?;
            let norms = s21.cell_norms();
            let before = coarse.changed_count();
            coarse.retain(|i| norms[i] > 0.0);
            info.static_cells_dropped = before - coarse.changed_count();
            info.iterations = km.iterations;
            info.converged = km.converged;
            info.inertia = km.inertia;
            info.cluster_sizes = km.cluster_sizes();
            log::debug!(
                "change cluster {} with votes {:?}, {} static cells dropped",
                tally.change_cluster,
                tally.votes,
                info.static_cells_dropped
            );
            info.vote = Some(tally);
            (coarse, proj.into_vec(), km.labels)
        }
    };
    timer.lap("cva");

    let coarse_mask = upsample(&coarse).resize_nearest(w, h);
    let (mask, refinement) = if config.refine.enabled {
        let sources: &[PrototypeSource] = match config.refine.source {
            RefineSource::Pre => &[PrototypeSource::Pre],
            RefineSource::Post => &[PrototypeSource::Post],
            RefineSource::Both => &[PrototypeSource::Pre, PrototypeSource::Post],
        };
        let mut out = ChangeMask::zeros(w, h);
        let mut per_source = BTreeMap::new();
        for &src in sources {
            let seg = segments.get(src).stage("refine")?;
            let (m, stats) = refine_with_stats(&coarse_mask, seg, config.refine.threshold).stage("refine")?;
            out = out.union(&m).stage("refine")?;
            let name = if src == PrototypeSource::Pre { "pre" } else { "post" };
            per_source.insert(name.to_string(), stats);
        }
        if config.refine.union_with_coarse {
            out = out.union(&coarse_mask).stage("refine")?;
        }
        (
            out,
            Some(RefineInfo {
                threshold: config.refine.threshold,
                union_with_coarse: config.refine.union_with_coarse,
                per_source,
            }),
        )
    } else {
        (coarse_mask.clone(), None)
    };
    timer.lap("refine");

    let report = RunReport {
        config: config.to_pairs(),
        width: w,
        height: h,
        bands: pair.bands(),
        resized_width: rw,
        resized_height: rh,
        grid,
        prototype: PrototypeInfo {
            source: proto.source(),
            anchor: proto.anchor(),
            chip_width: proto.chip().width(),
            chip_height: proto.chip().height(),
            mask_pixels: proto.mask_pixels(),
            segment: proto.segment(),
            seed: proto_seed,
        },
        clustering: info,
        coarse_changed_cells: coarse.changed_count(),
        coarse_changed_pixels: coarse_mask.count_changed(),
        refinement,
        changed_pixels: mask.count_changed(),
        timings: timer.finish(),
        metrics: None,
    };
    Ok(Detection {
        mask,
        coarse_mask,
        report,
        intermediates: Intermediates {
            grid,
            components: if projections.is_empty() { 0 } else { config.pca_components },
            projections,
            labels,
            coarse,
        },
    })
}

#[derive(Serialize)]
struct DumpHeader<'a> {
    file: &'a str,
    dtype: &'a str,
    shape: Vec<usize>,
    byte_order: &'a str,
}

/// Writes projections (`f64`), labels (`u32`) and the coarse map (`u8`) as
/// flat little-endian files, each with a JSON header next to it.
pub fn dump_intermediates(det: &Detection, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let it = &det.intermediates;
    let g = it.grid;
    let write = |name: &str, dtype: &str, shape: Vec<usize>, bytes: Vec<u8>| -> Result<()> {
        let file = format!("{name}.bin");
        fs::write(dir.join(&file), bytes)?;
        let header = DumpHeader {
            file: &file,
            dtype,
            shape,
            byte_order: "little",
        };
        fs::write(dir.join(format!("{name}.json")), serde_json::to_vec_pretty(&header)?)?;
        Ok(())
    };
    write(
        "projections",
        "f64",
        vec![g.rows, g.cols, it.components],
        it.projections.iter().flat_map(|v| v.to_le_bytes()).collect(),
    )?;
    write(
        "labels",
        "u32",
        vec![g.rows, g.cols],
        it.labels.iter().flat_map(|&l| (l as u32).to_le_bytes()).collect(),
    )?;
    write(
        "coarse",
        "u8",
        vec![g.rows, g.cols],
        it.coarse.cells().iter().map(|&c| c as u8).collect(),
    )?;
    Ok(())
}
