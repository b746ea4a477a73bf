//! Unsupervised change detection in bi-temporal remote sensing images, guided
//! by a single prototype of the change of interest.
//!
//! The detector composites the prototype into both epochs, compares patch
//! embeddings of the four images, clusters the resulting change vectors and
//! keeps the cluster the prototype falls in. The patch-level map is then
//! snapped to image segments. Classical baselines (CVA, PCA-KMeans, IRMAD,
//! SFA) and a dataset evaluator are included for comparison.
//!
//! ```no_run
//! use protochange::{detect, load_pair, PipelineConfig};
//!
//! let pair = load_pair("A/tile.png", "B/tile.png")?;
//! let det = detect(&pair, &PipelineConfig::default())?;
//! det.mask.save("change.png", pair.pre().geo())?;
//! # Ok::<(), protochange::Error>(())
//! ```

pub mod baselines;
pub mod config;
pub mod cva;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod prototype;
pub mod raster;
pub mod refine;
pub mod synthetic;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::{detect, detect_with, Detection, RunReport};
pub use raster::{load_image, load_pair, ChangeMask, ImagePair, RasterImage};
