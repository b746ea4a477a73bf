//! Change vector analysis over patch differences.
//!
//! Each grid cell contributes one sample `[s21 | s11 | s22]`. The samples are
//! projected with PCA, split with k-means, and the cluster holding most of the
//! prototype cells is declared the change cluster.

pub mod kmeans;
pub mod pca;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DifferenceMap, PatchGrid};
use crate::linalg::Matrix;
use crate::raster::ChangeMask;

pub use kmeans::{kmeans, KMeansParams, KMeansResult};
pub use pca::{pca_fit, pca_fit_transform, PcaModel};

/// One row per grid cell, columns `[s21 | s11 | s22]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeVectors {
    grid: PatchGrid,
    data: Matrix,
}

impl ChangeVectors {
    pub fn grid(&self) -> PatchGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }
}

pub fn build_change_vectors(
    s21: &DifferenceMap,
    s11: &DifferenceMap,
    s22: &DifferenceMap,
) -> Result<ChangeVectors> {
    let grid = s21.grid();
    let d = s21.dim();
    for (name, m) in [("s11", s11), ("s22", s22)] {
        if m.grid() != grid || m.dim() != d {
            return Err(Error::ShapeMismatch(format!(
                "{name} is {}x{}x{}, s21 is {}x{}x{d}",
                m.grid().rows,
                m.grid().cols,
                m.dim(),
                grid.rows,
                grid.cols
            )));
        }
    }
    let data = Matrix::from_fn(grid.cells(), 3 * d, |r, c| {
        let src = [s21, s11, s22][c / d];
        src.cell(r)[c % d] as f64
    });
    Ok(ChangeVectors { grid, data })
}

/// Outcome of the prototype vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    /// Prototype cells per cluster.
    pub votes: Vec<usize>,
    /// Mean `‖s21‖` over all cells of each cluster.
    pub mean_s21: Vec<f64>,
    pub change_cluster: usize,
    pub tie_broken: bool,
}

/// Majority cluster among `proto_cells`; ties go to the cluster whose cells
/// have the larger mean `‖s21‖`, then to the lower id.
pub fn vote_change_cluster(
    labels: &[usize],
    proto_cells: &[usize],
    s21: &DifferenceMap,
) -> Result<VoteTally> {
    if proto_cells.is_empty() {
        return Err(Error::EmptyPrototypeCells);
    }
    if labels.len() != s21.grid().cells() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} cells",
            labels.len(),
            s21.grid().cells()
        )));
    }
    if let Some(&bad) = proto_cells.iter().find(|&&c| c >= labels.len()) {
        return Err(Error::OutOfBounds(format!("prototype cell {bad} outside grid")));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![0usize; k];
    for &c in proto_cells {
        votes[labels[c]] += 1;
    }
    let norms = s21.cell_norms();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&l, n) in labels.iter().zip(&norms) {
        sums[l] += n;
        counts[l] += 1;
    }
    let mean_s21: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();

    let top = *votes.iter().max().expect("k >= 1");
    let leaders: Vec<usize> = (0..k).filter(|&j| votes[j] == top).collect();
    let change_cluster = leaders
        .iter()
        .copied()
        .fold(leaders[0], |best, j| if mean_s21[j] > mean_s21[best] { j } else { best });
    Ok(VoteTally {
        votes,
        mean_s21,
        change_cluster,
        tie_broken: leaders.len() > 1,
    })
}

pub fn assign_change_cluster(
    labels: &[usize],
    proto_cells: &[usize],
    s21: &DifferenceMap,
) -> Result<usize> {
    vote_change_cluster(labels, proto_cells, s21).map(|t| t.change_cluster)
}

/// Patch-resolution binary change map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseChangeMap {
    grid: PatchGrid,
    cells: Vec<bool>,
}

impl CoarseChangeMap {
    pub fn new(grid: PatchGrid, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != grid.cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                grid.rows,
                grid.cols
            )));
        }
        Ok(Self { grid, cells })
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn is_changed(&self, row: usize, col: usize) -> bool {
        self.cells[self.grid.index(row, col)]
    }

    pub fn changed_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Clears every cell for which `keep` returns false.
    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        for (i, c) in self.cells.iter_mut().enumerate() {
            *c = *c && keep(i);
        }
    }
}

pub fn coarse_map(labels: &[usize], change_id: usize, grid: PatchGrid) -> Result<CoarseChangeMap> {
    CoarseChangeMap::new(grid, labels.iter().map(|&l| l == change_id).collect())
}

/// Replicates every cell into its `patch x patch` pixel block.
pub fn upsample(coarse: &CoarseChangeMap) -> ChangeMask {
    let g = coarse.grid;
    ChangeMask::from_fn(g.width(), g.height(), |x, y| {
        coarse.is_changed(y / g.patch, x / g.patch)
    })
}
