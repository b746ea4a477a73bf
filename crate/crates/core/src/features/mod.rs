//! Patch-level embeddings and their differences.
//!
//! An image whose sides are multiples of the patch size (14 px) is cut into a
//! [`PatchGrid`]; each cell receives one `dim`-dimensional vector from a
//! [`PatchEmbedder`]. Two embedders exist: an ONNX model producing one token
//! per patch (ViT-style), and a deterministic patch-statistics embedder that
//! needs no model file.

mod stats;
#[cfg(feature = "onnx")]
mod onnx;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub use stats::PatchStatistics;
#[cfg(feature = "onnx")]
pub use onnx::OnnxEmbedder;

/// Patch side in pixels used throughout the pipeline.
pub const PATCH_SIZE: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch: usize,
}

impl PatchGrid {
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn width(&self) -> usize {
        self.cols * self.patch
    }

    pub fn height(&self) -> usize {
        self.rows * self.patch
    }

    /// Row-major cell index of `(row, col)`.
    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }
}

pub fn patch_grid(width: usize, height: usize, patch: usize) -> Result<PatchGrid> {
    if patch == 0 || width == 0 || height == 0 || !width.is_multiple_of(patch) || !height.is_multiple_of(patch) {
        return Err(Error::NotMultiple {
            width,
            height,
            patch,
        });
    }
    Ok(PatchGrid {
        rows: height / patch,
        cols: width / patch,
        patch,
    })
}

/// `rows x cols x dim` patch embeddings, cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    grid: PatchGrid,
    dim: usize,
    data: Vec<f32>,
}

/// Elementwise difference of two feature maps on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMap {
    grid: PatchGrid,
    dim: usize,
    data: Vec<f32>,
}

fn check_tensor(grid: &PatchGrid, dim: usize, data: &[f32]) -> Result<()> {
    if dim == 0 || data.len() != grid.cells() * dim {
        return Err(Error::ShapeMismatch(format!(
            "expected {}x{}x{dim} values, got {}",
            grid.rows,
            grid.cols,
            data.len()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch(
            "non-finite value in feature tensor".into(),
        ));
    }
    Ok(())
}

macro_rules! tensor_accessors {
    ($t:ty) => {
        impl $t {
            pub fn new(grid: PatchGrid, dim: usize, data: Vec<f32>) -> Result<Self> {
                check_tensor(&grid, dim, &data)?;
                Ok(Self { grid, dim, data })
            }

            pub fn grid(&self) -> PatchGrid {
                self.grid
            }

            pub fn dim(&self) -> usize {
                self.dim
            }

            pub fn data(&self) -> &[f32] {
                &self.data
            }

            /// Vector of the cell at row-major `index`.
            #[inline]
            pub fn cell(&self, index: usize) -> &[f32] {
                &self.data[index * self.dim..(index + 1) * self.dim]
            }

            #[inline]
            pub fn at(&self, row: usize, col: usize) -> &[f32] {
                self.cell(self.grid.index(row, col))
            }

            /// Euclidean norm of every cell vector.
            pub fn cell_norms(&self) -> Vec<f64> {
                self.data
                    .chunks_exact(self.dim)
                    .map(|c| c.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
                    .collect()
            }
        }
    };
}

tensor_accessors!(FeatureMap);
tensor_accessors!(DifferenceMap);

impl DifferenceMap {
    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f32) -> DifferenceMap {
        DifferenceMap {
            grid: self.grid,
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// `S_ba = f(b) - f(a)`, computed cell by cell.
pub fn feature_difference(a: &FeatureMap, b: &FeatureMap) -> Result<DifferenceMap> {
    if a.grid != b.grid || a.dim != b.dim {
        return Err(Error::ShapeMismatch(format!(
            "cannot subtract {}x{}x{} from {}x{}x{}",
            a.grid.rows, a.grid.cols, a.dim, b.grid.rows, b.grid.cols, b.dim
        )));
    }
    Ok(DifferenceMap {
        grid: a.grid,
        dim: a.dim,
        data: b.data.iter().zip(&a.data).map(|(y, x)| y - x).collect(),
    })
}

/// Anything that maps an image to one vector per patch.
pub trait PatchEmbedder {
    fn dim(&self) -> usize;

    fn patch(&self) -> usize {
        PATCH_SIZE
    }

    fn extract(&self, img: &RasterImage) -> Result<FeatureMap>;
}

/// Declarative backend choice, opened with [`FeatureBackend::open`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureBackend {
    /// Per-patch band means, band standard deviations and an 8-bin gradient
    /// orientation histogram, padded or truncated to `dim`.
    PatchStatistics { dim: usize },
    /// ONNX model mapping a `1x3xHxW` normalized image to `(H/14)(W/14)` tokens.
    Neural { model: PathBuf },
}

impl Default for FeatureBackend {
    fn default() -> Self {
        FeatureBackend::PatchStatistics { dim: 16 }
    }
}

impl FeatureBackend {
    /// Validates the spec and loads any model. Each worker should open its own.
    pub fn open(&self) -> Result<Box<dyn PatchEmbedder>> {
        match self {
            FeatureBackend::PatchStatistics { dim } => Ok(Box::new(PatchStatistics::new(*dim)?)),
            FeatureBackend::Neural { model } => {
                if !model.is_file() {
                    return Err(Error::ModelLoadFailure {
                        path: model.clone(),
                        message: "model file does not exist".into(),
                    });
                }
                #[cfg(feature = "onnx")]
                {
                    Ok(Box::new(OnnxEmbedder::load(model)?))
                }
                #[cfg(not(feature = "onnx"))]
                {
                    Err(Error::ModelLoadFailure {
                        path: model.clone(),
                        message: "built without the `onnx` feature".into(),
                    })
                }
            }
        }
    }
}

/// Convenience wrapper: open `backend` and extract features of `img`.
pub fn extract_features(img: &RasterImage, backend: &FeatureBackend) -> Result<FeatureMap> {
    backend.open()?.extract(img)
}
