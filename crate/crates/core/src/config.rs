//! Run configuration as flat dotted keys.
//!
//! A config file is TOML; nested tables flatten to dotted keys, so
//! `[refine] threshold = 0.8` and `"refine.threshold" = 0.8` are equivalent.
//! Every setting can also be applied as a `key=value` string, which is how
//! command-line overrides and report replay work.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineParams;
use crate::cva::KMeansParams;
use crate::error::{Error, Result};
use crate::features::FeatureBackend;
use crate::metrics::Aggregation;
use crate::prototype::{Anchor, PrototypeSource};

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "PROTOCHANGE_CONFIG";

/// How the prototype is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrototypeSpec {
    /// A uniformly drawn segment of the source epoch.
    Random { source: PrototypeSource },
    /// A mask over the source epoch; the chip is its bounding box.
    Mask { path: PathBuf, source: PrototypeSource },
    /// A chip image with its mask, placed at `anchor` (scene center if unset).
    External {
        chip: PathBuf,
        mask: PathBuf,
        anchor: Option<Anchor>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentProvider {
    Builtin { quant_levels: usize, min_size: usize },
    /// Precomputed 16-bit segment maps, one per epoch.
    Files {
        pre: Option<PathBuf>,
        post: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineSource {
    Pre,
    Post,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub enabled: bool,
    pub threshold: f64,
    pub source: RefineSource,
    pub union_with_coarse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Root seed; every random stage derives its own seed from it.
    pub seed: u64,
    pub backend: FeatureBackend,
    pub prototype: PrototypeSpec,
    /// Minimum fraction of a cell the prototype must cover to vote.
    pub coverage: f64,
    pub pca_components: usize,
    pub kmeans: KMeansParams,
    pub refine: RefineConfig,
    pub segments: SegmentProvider,
    pub baselines: BaselineParams,
    pub workers: usize,
    pub aggregation: Aggregation,
    pub timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            backend: FeatureBackend::default(),
            prototype: PrototypeSpec::Random {
                source: PrototypeSource::Post,
            },
            coverage: 0.5,
            pca_components: 1,
            kmeans: KMeansParams::default(),
            refine: RefineConfig {
                enabled: true,
                threshold: 0.7,
                source: RefineSource::Both,
                union_with_coarse: false,
            },
            segments: SegmentProvider::Builtin {
                quant_levels: 8,
                min_size: 32,
            },
            baselines: BaselineParams::default(),
            workers: 0,
            aggregation: Aggregation::Micro,
            timings: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key} = `{value}`: {e}")))
}

fn parse_source(key: &str, value: &str) -> Result<PrototypeSource> {
    match value {
        "pre" => Ok(PrototypeSource::Pre),
        "post" => Ok(PrototypeSource::Post),
        _ => Err(Error::Config(format!("{key} must be pre or post, got `{value}`"))),
    }
}

fn source_name(s: PrototypeSource) -> &'static str {
    match s {
        PrototypeSource::Pre => "pre",
        PrototypeSource::Post => "post",
        PrototypeSource::External => "external",
    }
}

fn path_opt(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    /// Defaults, overlaid with the file named by `PROTOCHANGE_CONFIG` if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut cfg = Self::default();
        cfg.merge_toml(&text)?;
        Ok(cfg)
    }

    /// Applies every key of a TOML document on top of `self`.
    pub fn merge_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &toml::Value::Table(table), &mut flat)?;
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Applies `key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        // Kind selectors first so that their companion keys land on the right variant.
        for k in ["backend.kind", "prototype.kind", "segments.kind"] {
            if let Some(v) = pairs.get(k) {
                cfg.set(k, v)?;
            }
        }
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "backend.kind" => {
                self.backend = match v {
                    "stats" => match self.backend {
                        FeatureBackend::PatchStatistics { .. } => self.backend.clone(),
                        _ => FeatureBackend::default(),
                    },
                    "neural" => match &self.backend {
                        FeatureBackend::Neural { .. } => self.backend.clone(),
                        _ => FeatureBackend::Neural {
                            model: PathBuf::new(),
                        },
                    },
                    _ => return Err(Error::Config(format!("backend.kind must be stats or neural, got `{v}`"))),
                }
            }
            "backend.dim" => match &mut self.backend {
                FeatureBackend::PatchStatistics { dim } => *dim = parse(key, v)?,
                FeatureBackend::Neural { .. } => {
                    return Err(Error::Config("backend.dim applies to the stats backend".into()))
                }
            },
            "backend.model" => {
                self.backend = FeatureBackend::Neural {
                    model: PathBuf::from(v),
                }
            }
            "prototype.kind" => {
                let source = match &self.prototype {
                    PrototypeSpec::Random { source } | PrototypeSpec::Mask { source, .. } => *source,
                    PrototypeSpec::External { .. } => PrototypeSource::Post,
                };
                self.prototype = match v {
                    "random" => PrototypeSpec::Random { source },
                    "mask" => match &self.prototype {
                        p @ PrototypeSpec::Mask { .. } => p.clone(),
                        _ => PrototypeSpec::Mask {
                            path: PathBuf::new(),
                            source,
                        },
                    },
                    "external" => match &self.prototype {
                        p @ PrototypeSpec::External { .. } => p.clone(),
                        _ => PrototypeSpec::External {
                            chip: PathBuf::new(),
                            mask: PathBuf::new(),
                            anchor: None,
                        },
                    },
                    _ => {
                        return Err(Error::Config(format!(
                            "prototype.kind must be random, mask or external, got `{v}`"
                        )))
                    }
                }
            }
            "prototype.source" => match &mut self.prototype {
                PrototypeSpec::Random { source } | PrototypeSpec::Mask { source, .. } => {
                    *source = parse_source(key, v)?
                }
                PrototypeSpec::External { .. } => {
                    return Err(Error::Config("external prototypes have no scene source".into()))
                }
            },
            "prototype.mask" => match &mut self.prototype {
                PrototypeSpec::Mask { path, .. } => *path = PathBuf::from(v),
                PrototypeSpec::External { mask, .. } => *mask = PathBuf::from(v),
                PrototypeSpec::Random { source } => {
                    self.prototype = PrototypeSpec::Mask {
                        path: PathBuf::from(v),
                        source: *source,
                    }
                }
            },
            "prototype.chip" => match &mut self.prototype {
                PrototypeSpec::External { chip, .. } => *chip = PathBuf::from(v),
                _ => {
                    return Err(Error::Config("prototype.chip needs prototype.kind = external".into()))
                }
            },
            "prototype.anchor" => match &mut self.prototype {
                PrototypeSpec::External { anchor, .. } => {
                    *anchor = if v.is_empty() {
                        None
                    } else {
                        let (r, c) = v.split_once(',').ok_or_else(|| {
                            Error::Config(format!("prototype.anchor must be `row,col`, got `{v}`"))
                        })?;
                        Some(Anchor::new(parse(key, r)?, parse(key, c)?))
                    }
                }
                _ => {
                    return Err(Error::Config(
                        "prototype.anchor needs prototype.kind = external".into(),
                    ))
                }
            },
            "prototype.coverage" => self.coverage = parse(key, v)?,
            "pca.components" => self.pca_components = parse(key, v)?,
            "kmeans.k" => self.kmeans.k = parse(key, v)?,
            "kmeans.max_iter" => self.kmeans.max_iter = parse(key, v)?,
            "kmeans.tol" => self.kmeans.tol = parse(key, v)?,
            "refine.enabled" => self.refine.enabled = parse(key, v)?,
            "refine.threshold" => self.refine.threshold = parse(key, v)?,
            "refine.source" => {
                self.refine.source = match v {
                    "pre" => RefineSource::Pre,
                    "post" => RefineSource::Post,
                    "both" => RefineSource::Both,
                    _ => return Err(Error::Config(format!("refine.source must be pre, post or both, got `{v}`"))),
                }
            }
            "refine.union_with_coarse" => self.refine.union_with_coarse = parse(key, v)?,
            "segments.kind" => {
                self.segments = match (v, &self.segments) {
                    ("builtin", s @ SegmentProvider::Builtin { .. }) => s.clone(),
                    ("builtin", _) => PipelineConfig::default().segments,
                    ("file", s @ SegmentProvider::Files { .. }) => s.clone(),
                    ("file", _) => SegmentProvider::Files { pre: None, post: None },
                    _ => return Err(Error::Config(format!("segments.kind must be builtin or file, got `{v}`"))),
                }
            }
            "segments.quant_levels" | "segments.min_size" => match &mut self.segments {
                SegmentProvider::Builtin {
                    quant_levels,
                    min_size,
                } => {
                    let n = parse(key, v)?;
                    if key.ends_with("quant_levels") {
                        *quant_levels = n
                    } else {
                        *min_size = n
                    }
                }
                SegmentProvider::Files { .. } => {
                    return Err(Error::Config(format!("{key} applies to the builtin segmenter")))
                }
            },
            "segments.pre" | "segments.post" => {
                if !matches!(self.segments, SegmentProvider::Files { .. }) {
                    self.segments = SegmentProvider::Files { pre: None, post: None };
                }
                if let SegmentProvider::Files { pre, post } = &mut self.segments {
                    let slot = if key == "segments.pre" { pre } else { post };
                    *slot = path_opt(v);
                }
            }
            "pcakmeans.block" => self.baselines.pca_kmeans.block = parse(key, v)?,
            "pcakmeans.components" => self.baselines.pca_kmeans.components = parse(key, v)?,
            "irmad.max_iter" => self.baselines.irmad.max_iter = parse(key, v)?,
            "irmad.eps" => self.baselines.irmad.eps = parse(key, v)?,
            "irmad.ridge" => self.baselines.irmad.ridge = parse(key, v)?,
            "irmad.confidence" => self.baselines.irmad.confidence = parse(key, v)?,
            "sfa.ridge" => self.baselines.sfa.ridge = parse(key, v)?,
            "sfa.confidence" => self.baselines.sfa.confidence = parse(key, v)?,
            "eval.workers" => self.workers = parse(key, v)?,
            "eval.aggregation" => self.aggregation = Aggregation::parse(v)?,
            "report.timings" => self.timings = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Every setting as `key -> value`; [`PipelineConfig::from_pairs`] inverts it.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        match &self.backend {
            FeatureBackend::PatchStatistics { dim } => {
                put("backend.kind", "stats".into());
                put("backend.dim", dim.to_string());
            }
            FeatureBackend::Neural { model } => {
                put("backend.kind", "neural".into());
                put("backend.model", model.display().to_string());
            }
        }
        match &self.prototype {
            PrototypeSpec::Random { source } => {
                put("prototype.kind", "random".into());
                put("prototype.source", source_name(*source).into());
            }
            PrototypeSpec::Mask { path, source } => {
                put("prototype.kind", "mask".into());
                put("prototype.mask", path.display().to_string());
                put("prototype.source", source_name(*source).into());
            }
            PrototypeSpec::External { chip, mask, anchor } => {
                put("prototype.kind", "external".into());
                put("prototype.chip", chip.display().to_string());
                put("prototype.mask", mask.display().to_string());
                put(
                    "prototype.anchor",
                    anchor.map(|a| format!("{},{}", a.row, a.col)).unwrap_or_default(),
                );
            }
        }
        put("prototype.coverage", self.coverage.to_string());
        put("pca.components", self.pca_components.to_string());
        put("kmeans.k", self.kmeans.k.to_string());
        put("kmeans.max_iter", self.kmeans.max_iter.to_string());
        put("kmeans.tol", self.kmeans.tol.to_string());
        put("refine.enabled", self.refine.enabled.to_string());
        put("refine.threshold", self.refine.threshold.to_string());
        put(
            "refine.source",
            match self.refine.source {
                RefineSource::Pre => "pre",
                RefineSource::Post => "post",
                RefineSource::Both => "both",
            }
            .into(),
        );
        put("refine.union_with_coarse", self.refine.union_with_coarse.to_string());
        match &self.segments {
            SegmentProvider::Builtin {
                quant_levels,
                min_size,
            } => {
                put("segments.kind", "builtin".into());
                put("segments.quant_levels", quant_levels.to_string());
                put("segments.min_size", min_size.to_string());
            }
            SegmentProvider::Files { pre, post } => {
                put("segments.kind", "file".into());
                put("segments.pre", path_str(pre));
                put("segments.post", path_str(post));
            }
        }
        let b = &self.baselines;
        put("pcakmeans.block", b.pca_kmeans.block.to_string());
        put("pcakmeans.components", b.pca_kmeans.components.to_string());
        put("irmad.max_iter", b.irmad.max_iter.to_string());
        put("irmad.eps", b.irmad.eps.to_string());
        put("irmad.ridge", b.irmad.ridge.to_string());
        put("irmad.confidence", b.irmad.confidence.to_string());
        put("sfa.ridge", b.sfa.ridge.to_string());
        put("sfa.confidence", b.sfa.confidence.to_string());
        put("eval.workers", self.workers.to_string());
        put(
            "eval.aggregation",
            match self.aggregation {
                Aggregation::Micro => "micro",
                Aggregation::Macro => "macro",
            }
            .into(),
        );
        put("report.timings", self.timings.to_string());
        m
    }

    /// Seed for a named stage, derived from the root seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        stage_seed(self.seed, stage)
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, String>) -> Result<()> {
    let s = match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out)?;
            }
            return Ok(());
        }
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => {
            return Err(Error::Config(format!(
                "{prefix}: unsupported value type {}",
                other.type_str()
            )))
        }
    };
    out.insert(prefix.to_string(), s);
    Ok(())
}

/// SplitMix64 of the root seed mixed with an FNV-1a hash of the stage name.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let c = PipelineConfig::default();
        assert_eq!(c.pca_components, 1);
        assert_eq!(c.kmeans.k, 2);
        assert_eq!(c.refine.threshold, 0.7);
    }

    #[test]
    fn pairs_round_trip() {
        let mut c = PipelineConfig::default();
        c.set("seed", "99").unwrap();
        c.set("refine.threshold", "0.65").unwrap();
        c.set("segments.pre", "a.png").unwrap();
        c.set("prototype.kind", "external").unwrap();
        c.set("prototype.chip", "chip.png").unwrap();
        c.set("prototype.anchor", "3,4").unwrap();
        c.set("backend.model", "m.onnx").unwrap();
        let back = PipelineConfig::from_pairs(&c.to_pairs()).unwrap();
        assert_eq!(back, c);
        assert_eq!(
            PipelineConfig::from_pairs(&PipelineConfig::default().to_pairs()).unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn toml_tables_flatten() {
        let mut c = PipelineConfig::default();
        c.merge_toml("seed = 3\n[refine]\nthreshold = 0.8\nsource = \"pre\"\n[kmeans]\ntol = 1e-4\n")
            .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.refine.threshold, 0.8);
        assert_eq!(c.refine.source, RefineSource::Pre);
        assert_eq!(c.kmeans.tol, 1e-4);
        assert!(c.merge_toml("nope = 1").is_err());
    }

    #[test]
    fn overrides_parse() {
        let mut c = PipelineConfig::default();
        c.apply_override("kmeans.max_iter = 5").unwrap();
        assert_eq!(c.kmeans.max_iter, 5);
        assert!(c.apply_override("kmeans.max_iter").is_err());
        assert!(c.apply_override("kmeans.max_iter=x").is_err());
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(1, "kmeans"), stage_seed(1, "prototype"));
        assert_ne!(stage_seed(1, "kmeans"), stage_seed(2, "kmeans"));
        assert_eq!(stage_seed(5, "kmeans"), stage_seed(5, "kmeans"));
    }
}
