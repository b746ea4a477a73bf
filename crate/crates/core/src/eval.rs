//! Dataset evaluation of the detector and the baselines.
//!
//! Samples run concurrently; a failing sample is recorded and skipped. Masks
//! are written before any metric is computed. A sample with its own
//! prototype mask uses it (over the post image) instead of the configured
//! prototype.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineMethod};
use crate::config::{PipelineConfig, PrototypeSpec};
use crate::dataset::{scan_dataset, SampleEntry};
use crate::error::{Error, Result};
use crate::features::PatchEmbedder;
use crate::metrics::{aggregate_with, class_metrics, confusion, render_table, ClassMetrics, ConfusionMatrix, MethodRow, MetricsReport};
use crate::pipeline::{detect_with, RunReport};
use crate::prototype::PrototypeSource;
use crate::raster::ChangeMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Pucd,
    /// The detector without segment refinement (coarse map only).
    PucdNoSam,
    Baseline(BaselineMethod),
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Pucd,
        Method::PucdNoSam,
        Method::Baseline(BaselineMethod::Cva),
        Method::Baseline(BaselineMethod::PcaKMeans),
        Method::Baseline(BaselineMethod::Irmad),
        Method::Baseline(BaselineMethod::Sfa),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pucd => "pucd",
            Method::PucdNoSam => "pucd-nosam",
            Method::Baseline(b) => b.name(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{name}`; expected one of pucd, pucd-nosam, cva, pcakmeans, irmad, sfa"
                ))
            })
    }

    /// Parses a comma-separated list; `all` selects every method.
    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        if list.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        list.split(',').map(|s| Self::parse(s.trim())).collect()
    }
}

/// Result of one method on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub method: String,
    /// `None` when the sample failed.
    pub confusion: Option<ConfusionMatrix>,
    pub metrics: Option<ClassMetrics>,
    pub error: Option<String>,
    pub mask_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<RunReport>,
}

impl SampleOutcome {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub table: MetricsReport,
    pub samples: Vec<SampleOutcome>,
}

impl EvalReport {
    pub fn render_table(&self) -> String {
        render_table(&self.table.rows)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SampleOutcome> {
        self.samples.iter().filter(|s| s.failed())
    }

    /// Writes `table.txt`, `metrics.json` and `samples.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("table.txt"), self.render_table())?;
        fs::write(dir.join("metrics.json"), serde_json::to_vec_pretty(&self.table)?)?;
        fs::write(dir.join("samples.json"), serde_json::to_vec_pretty(&self.samples)?)?;
        Ok(())
    }
}

/// Runs `method` on one pair and returns the predicted mask. The detector
/// methods need an opened embedder; the baselines ignore it.
pub fn run_method(
    method: Method,
    pair: &crate::raster::ImagePair,
    config: &PipelineConfig,
    embedder: Option<&dyn PatchEmbedder>,
) -> Result<(ChangeMask, Option<RunReport>)> {
    match method {
        Method::Pucd | Method::PucdNoSam => {
            let embedder = embedder
                .ok_or_else(|| Error::Config(format!("{} needs a feature backend", method.name())))?;
            let mut cfg = config.clone();
            if method == Method::PucdNoSam {
                cfg.refine.enabled = false;
            }
            let det = detect_with(pair, &cfg, embedder)?;
            Ok((det.mask, Some(det.report)))
        }
        Method::Baseline(b) => {
            let mut params = config.baselines;
            params.pca_kmeans.seed = config.stage_seed("pcakmeans");
            Ok((run_baseline(b, pair, &params)?.mask, None))
        }
    }
}

fn run_sample(
    entry: &SampleEntry,
    methods: &[Method],
    config: &PipelineConfig,
    embedder: &Result<Box<dyn PatchEmbedder>>,
    mask_dir: Option<&Path>,
) -> Vec<SampleOutcome> {
    let failed_all = |msg: String| {
        methods
            .iter()
            .map(|m| SampleOutcome {
                id: entry.id.clone(),
                method: m.name().to_string(),
                confusion: None,
                metrics: None,
                error: Some(msg.clone()),
                mask_path: None,
                report: None,
            })
            .collect()
    };
    let sample = match entry.load() {
        Ok(s) => s,
        Err(e) => return failed_all(e.to_string()),
    };
    let label = match &sample.label {
        Some(l) => l,
        None => return failed_all("sample has no label".into()),
    };
    let sample_config = match &entry.prototype {
        Some(path) => {
            let mut c = config.clone();
            c.prototype = PrototypeSpec::Mask {
                path: path.clone(),
                source: PrototypeSource::Post,
            };
            c
        }
        None => config.clone(),
    };
    methods
        .iter()
        .map(|&m| {
            let mut out = SampleOutcome {
                id: entry.id.clone(),
                method: m.name().to_string(),
                confusion: None,
                metrics: None,
                error: None,
                mask_path: None,
                report: None,
            };
            let result = (|| -> Result<()> {
                let embedder = embedder.as_ref().ok().map(|e| e.as_ref());
                let (mask, report) = run_method(m, &sample.pair, &sample_config, embedder)?;
                if let Some(dir) = mask_dir {
                    let path = dir.join(m.name()).join(format!("{}.png", entry.id));
                    mask.save(&path, sample.pair.pre().geo())?;
                    out.mask_path = Some(path);
                }
                let cm = confusion(&mask, label)?;
                out.metrics = Some(class_metrics(&cm)?);
                out.confusion = Some(cm);
                out.report = report;
                Ok(())
            })();
            if let Err(e) = result {
                log::warn!("{} failed on {}: {e}", m.name(), entry.id);
                out.error = Some(e.to_string());
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub methods: Vec<Method>,
    /// Masks go to `<out_dir>/masks/<method>/<id>.png`, reports next to them.
    pub out_dir: Option<PathBuf>,
}

/// Evaluates every method over the labeled dataset at `root`.
pub fn evaluate(root: &Path, config: &PipelineConfig, options: &EvalOptions) -> Result<EvalReport> {
    let entries = scan_dataset(root)?;
    let unlabeled: Vec<&str> = entries
        .iter()
        .filter(|e| e.label.is_none())
        .map(|e| e.id.as_str())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "labels required for evaluation; {} of {} samples have no label/ file (first: {})",
            unlabeled.len(),
            entries.len(),
            unlabeled[0]
        )));
    }
    let methods = if options.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        options.methods.clone()
    };
    if methods.iter().any(|m| matches!(m, Method::Pucd | Method::PucdNoSam)) {
        // Fail fast on a broken backend rather than once per sample.
        config.backend.open()?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start workers: {e}")))?;
    let mask_dir = options.out_dir.as_deref().map(|d| d.join("masks"));
    let mut samples: Vec<SampleOutcome> = pool.install(|| {
        entries
            .par_iter()
            .map_init(
                || config.backend.open(),
                |embedder, entry| run_sample(entry, &methods, config, embedder, mask_dir.as_deref()),
            )
            .flatten()
            .collect()
    });
    samples.sort_by(|a, b| (&a.method, &a.id).cmp(&(&b.method, &b.id)));

    let mut rows = Vec::new();
    for m in &methods {
        let mine: Vec<&SampleOutcome> = samples.iter().filter(|s| s.method == m.name()).collect();
        let ok: Vec<ConfusionMatrix> = mine.iter().filter_map(|s| s.confusion).collect();
        if ok.is_empty() {
            continue;
        }
        rows.push(MethodRow {
            method: m.name().to_string(),
            metrics: aggregate_with(&ok, config.aggregation)?,
            confusion: ok.iter().fold(ConfusionMatrix::default(), |a, c| a.merge(c)),
            samples: ok.len(),
            failed: mine.len() - ok.len(),
        });
    }
    let report = EvalReport {
        table: MetricsReport {
            aggregation: config.aggregation,
            zero_division: 0.0,
            rows,
        },
        samples,
    };
    if let Some(dir) = &options.out_dir {
        report.write(dir)?;
    }
    Ok(report)
}
