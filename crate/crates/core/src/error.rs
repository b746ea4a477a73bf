use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt data in {}: {message}", path.display())]
    CorruptData { path: PathBuf, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("unmatched file in dataset: {0}")]
    UnmatchedFile(String),

    #[error("{width}x{height} is not a multiple of the {patch}px patch size")]
    NotMultiple {
        width: usize,
        height: usize,
        patch: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("failed to load model {}: {message}", path.display())]
    ModelLoadFailure { path: PathBuf, message: String },

    #[error("prototype mask is empty")]
    EmptyMask,

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("segment map contains no segments")]
    NoSegments,

    #[error("invalid component count {requested} for {rows}x{cols} data")]
    InvalidComponentCount {
        requested: usize,
        rows: usize,
        cols: usize,
    },

    #[error("data has zero total variance")]
    DegenerateData,

    #[error("k-means needs at least {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },

    #[error("prototype covers no grid cell")]
    EmptyPrototypeCells,

    #[error("score map is constant")]
    ConstantScores,

    #[error("image {width}x{height} is smaller than block size {block}")]
    TooSmallImage {
        width: usize,
        height: usize,
        block: usize,
    },

    #[error("covariance matrix is not positive definite")]
    SingularCovariance,

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Strips [`Error::Stage`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
