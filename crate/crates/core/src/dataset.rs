//! LEVIR-style dataset layout: `root/A/<name>`, `root/B/<name>` and an
//! optional `root/label/<name>` with 0/255 change labels. An optional
//! `root/prototype/<name>` mask marks the prototype object for that sample.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{load_image, ChangeMask, ImagePair};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub id: String,
    pub pair: ImagePair,
    pub label: Option<ChangeMask>,
}

/// File locations for one sample, before any pixel is read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleEntry {
    pub id: String,
    pub pre: PathBuf,
    pub post: PathBuf,
    pub label: Option<PathBuf>,
    /// Prototype mask over the post image, if the dataset provides one.
    pub prototype: Option<PathBuf>,
}

impl SampleEntry {
    pub fn load(&self) -> Result<DatasetSample> {
        let pair = ImagePair::new(load_image(&self.pre)?, load_image(&self.post)?)?;
        let label = match &self.label {
            Some(path) => {
                let label = ChangeMask::load(path)?;
                if label.width() != pair.width() || label.height() != pair.height() {
                    return Err(Error::DimensionMismatch(format!(
                        "label {} is {}x{}, pair is {}x{}",
                        self.id,
                        label.width(),
                        label.height(),
                        pair.width(),
                        pair.height()
                    )));
                }
                Some(label)
            }
            None => None,
        };
        Ok(DatasetSample {
            id: self.id.clone(),
            pair,
            label,
        })
    }
}

fn raster_names(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    if !dir.is_dir() {
        return Ok(names);
    }
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let ext = Path::new(&name)
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("png" | "tif" | "tiff")) {
            names.insert(name);
        }
    }
    Ok(names)
}

/// Lists matched samples, sorted by file name, without reading pixels.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<Vec<SampleEntry>> {
    let root = root.as_ref();
    let (dir_a, dir_b, dir_label) = (root.join("A"), root.join("B"), root.join("label"));
    let a = raster_names(&dir_a)?;
    let b = raster_names(&dir_b)?;
    if let Some(name) = a.symmetric_difference(&b).next() {
        let side = if a.contains(name) { "B" } else { "A" };
        return Err(Error::UnmatchedFile(format!("{name} has no counterpart in {side}/")));
    }
    if a.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no rasters under {}",
            dir_a.display()
        )));
    }
    let labels = raster_names(&dir_label)?;
    let dir_proto = root.join("prototype");
    let protos = raster_names(&dir_proto)?;
    Ok(a.into_iter()
        .map(|name| SampleEntry {
            id: Path::new(&name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| name.clone()),
            pre: dir_a.join(&name),
            post: dir_b.join(&name),
            label: labels.contains(&name).then(|| dir_label.join(&name)),
            prototype: protos.contains(&name).then(|| dir_proto.join(&name)),
        })
        .collect())
}

/// Loads every sample eagerly. Large datasets are better served by
/// [`scan_dataset`] followed by per-sample [`SampleEntry::load`].
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<DatasetSample>> {
    scan_dataset(root)?.iter().map(SampleEntry::load).collect()
}
