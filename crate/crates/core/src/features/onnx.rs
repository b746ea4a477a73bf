use std::cell::RefCell;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tract_onnx::prelude::*;

use super::{patch_grid, FeatureMap, PatchEmbedder, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

// ImageNet statistics, as used by ViT/DINOv2 preprocessing.
const MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const STD: [f32; 3] = [0.229, 0.224, 0.225];

type Plan = Arc<TypedRunnableModel>;

/// Patch-token embedder backed by an ONNX model.
///
/// Contract for the model file: input `1 x 3 x H x W` (H, W multiples of 14,
/// ImageNet-normalized RGB), output `1 x N x D` or `N x D` patch tokens with
/// `N = (H/14)(W/14)` in row-major patch order. Class and register tokens
/// must be stripped at export time; any other token count is rejected.
///
/// Plans are compiled per input size and cached, so an embedder is meant to
/// live on one worker thread.
pub struct OnnxEmbedder {
    path: PathBuf,
    model: InferenceModel,
    plans: RefCell<HashMap<(usize, usize), Plan>>,
    dim: RefCell<Option<usize>>,
}

impl OnnxEmbedder {
    pub fn load(path: &Path) -> Result<Self> {
        let model = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(|e| Error::ModelLoadFailure {
                path: path.to_path_buf(),
                message: format!("{e:#}"),
            })?;
        Ok(Self {
            path: path.to_path_buf(),
            model,
            plans: RefCell::new(HashMap::new()),
            dim: RefCell::new(None),
        })
    }

    fn plan(&self, height: usize, width: usize) -> Result<Plan> {
        if let Some(p) = self.plans.borrow().get(&(height, width)) {
            return Ok(p.clone());
        }
        let plan = self
            .model
            .clone()
            .with_input_fact(0, f32::fact([1, 3, height, width]).into())
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| Error::ModelLoadFailure {
                path: self.path.clone(),
                message: format!("cannot compile for {width}x{height}: {e:#}"),
            })?;
        self.plans
            .borrow_mut()
            .insert((height, width), plan.clone());
        Ok(plan)
    }

    fn input_tensor(img: &RasterImage) -> Tensor {
        let (h, w, bands) = (img.height(), img.width(), img.bands());
        let mut data = vec![0f32; 3 * h * w];
        for c in 0..3 {
            let src = if bands >= 3 { c } else { 0 };
            let plane = &mut data[c * h * w..(c + 1) * h * w];
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = (img.get(x, y, src) - MEAN[c]) / STD[c];
                }
            }
        }
        tract_ndarray::Array4::from_shape_vec((1, 3, h, w), data)
            .expect("tensor shape matches buffer")
            .into()
    }
}

impl PatchEmbedder for OnnxEmbedder {
    /// Token dimension; known after the first extraction, 0 before that.
    fn dim(&self) -> usize {
        self.dim.borrow().unwrap_or(0)
    }

    fn extract(&self, img: &RasterImage) -> Result<FeatureMap> {
        let grid = patch_grid(img.width(), img.height(), PATCH_SIZE)?;
        let plan = self.plan(img.height(), img.width())?;
        let outputs = plan
            .run(tvec!(Self::input_tensor(img).into()))
            .map_err(|e| Error::ShapeMismatch(format!("inference failed: {e:#}")))?;
        let out = outputs
            .first()
            .ok_or_else(|| Error::ShapeMismatch("model produced no output".into()))?;
        let view = out
            .to_plain_array_view::<f32>()
            .map_err(|e| Error::ShapeMismatch(format!("output is not f32: {e}")))?;
        let shape = view.shape().to_vec();
        let (tokens, dim) = match shape.as_slice() {
            [1, n, d] | [n, d] => (*n, *d),
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "expected a token matrix, model returned shape {other:?}"
                )))
            }
        };
        if tokens != grid.cells() {
            return Err(Error::ShapeMismatch(format!(
                "model returned {tokens} tokens for a {}x{} patch grid",
                grid.rows, grid.cols
            )));
        }
        if let Some(known) = *self.dim.borrow() {
            if known != dim {
                return Err(Error::ShapeMismatch(format!(
                    "token dimension changed from {known} to {dim}"
                )));
            }
        }
        *self.dim.borrow_mut() = Some(dim);
        FeatureMap::new(grid, dim, view.iter().copied().collect())
    }
}
