//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use protochange::linalg::Matrix;
use protochange::metrics::{ClassMetrics, ConfusionMatrix};
use protochange::refine::SegmentMap;
use protochange::ChangeMask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mask(r: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> ChangeMask {
    ChangeMask::from_fn(w, h, |_, _| r.random_bool(p))
}

/// Pixel-by-pixel recount of the confusion matrix.
pub fn recount(pred: &ChangeMask, gt: &ChangeMask) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            match (pred.get(x, y), gt.get(x, y)) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fp += 1,
                (false, true) => cm.fn_ += 1,
                (false, false) => cm.tn += 1,
            }
        }
    }
    cm
}

/// The nine table columns from their definitions; 0/0 is 0.
pub fn metrics_oracle(cm: &ConfusionMatrix) -> ClassMetrics {
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let (tp, fp, fn_, tn) = (cm.tp, cm.fp, cm.fn_, cm.tn);
    let (p1, r1) = (div(tp, tp + fp), div(tp, tp + fn_));
    let (p0, r0) = (div(tn, tn + fn_), div(tn, tn + fp));
    ClassMetrics {
        precision0: p0,
        recall0: r0,
        f1_0: f1(p0, r0),
        iou0: div(tn, tn + fp + fn_),
        precision1: p1,
        recall1: r1,
        f1_1: f1(p1, r1),
        iou1: div(tp, tp + fp + fn_),
        acc: div(tp + tn, tp + fp + fn_ + tn),
    }
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let scales: Vec<f64> = (0..cols).map(|_| r.random_range(0.2..3.0)).collect();
    let mix = Matrix::from_fn(cols, cols, |_, _| r.random_range(-1.0..1.0));
    Matrix::from_fn(rows, cols, |_, c| r.random_range(-1.0..1.0) * scales[c]).matmul(&mix)
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Population cross-covariance of the columns of `a` and `b`.
pub fn covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() as f64;
    let ca = a.clone() - DMatrix::from_fn(a.nrows(), a.ncols(), |_, c| a.column(c).mean());
    let cb = b.clone() - DMatrix::from_fn(b.nrows(), b.ncols(), |_, c| b.column(c).mean());
    ca.transpose() * cb / n
}

/// Eigen-decomposition of the sample covariance, largest first, with the
/// largest-magnitude entry of each vector made positive.
pub fn covariance_pca(x: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = to_na(x);
    let cov = covariance(&m, &m) * (x.rows() as f64 / (x.rows() as f64 - 1.0));
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..x.cols()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| {
            let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let big = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            v.iter().map(|x| x * big.signum()).collect()
        })
        .collect();
    (vals, vecs)
}

/// Sample variance of the rows of `x` projected on the unit vector `u`.
pub fn variance_along(x: &Matrix, mean: &[f64], u: &[f64]) -> f64 {
    let proj: Vec<f64> = (0..x.rows())
        .map(|r| x.row(r).iter().zip(mean).zip(u).map(|((v, m), w)| (v - m) * w).sum())
        .collect();
    proj.iter().map(|p| p * p).sum::<f64>() / (x.rows() as f64 - 1.0)
}

pub fn random_unit(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut u: Vec<f64> = (0..d).map(|_| n.sample(r)).collect();
    let len = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= len);
    u
}

pub fn partition_inertia(x: &Matrix, in_first: impl Fn(usize) -> bool) -> f64 {
    let mut total = 0.0;
    for side in [true, false] {
        let rows: Vec<usize> = (0..x.rows()).filter(|&i| in_first(i) == side).collect();
        if rows.is_empty() {
            continue;
        }
        for c in 0..x.cols() {
            let mean = rows.iter().map(|&i| x[(i, c)]).sum::<f64>() / rows.len() as f64;
            total += rows.iter().map(|&i| (x[(i, c)] - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Smallest inertia over every split of the rows into two non-empty groups.
pub fn optimal_two_partition(x: &Matrix) -> f64 {
    let n = x.rows();
    (1u32..1 << (n - 1))
        .map(|bits| partition_inertia(x, |i| i < n - 1 && bits >> i & 1 == 1))
        .fold(f64::INFINITY, f64::min)
}

/// Twelve points from two unit Gaussians whose means are 3 apart.
pub fn two_group_instance(seed: u64) -> Matrix {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut r = rng(seed);
    Matrix::from_fn(12, 2, |i, c| n.sample(&mut r) + if i % 2 == 0 && c == 0 { 3.0 } else { 0.0 })
}

/// Two 2-D blobs of 80 and 120 unit-variance points, 10 apart.
pub fn separated_blobs(seed: u64) -> Matrix {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut r = rng(seed);
    Matrix::from_fn(200, 2, |i, _| n.sample(&mut r) + if i < 80 { 10.0 } else { 0.0 })
}

/// Area under the ROC curve by rank enumeration (ties count one half).
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            rank[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let sum: f64 = rank.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    (sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// Columns scaled to zero mean and unit population variance.
pub fn standardized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for c in 0..m.ncols() {
        let col = m.column(c);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m.nrows() as f64).sqrt();
        out.column_mut(c).iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    out
}

/// True when every segment is entirely inside or entirely outside `mask`,
/// and unsegmented pixels are outside.
pub fn is_union_of_segments(mask: &ChangeMask, seg: &SegmentMap) -> bool {
    let mut state = vec![None; seg.segment_count() + 1];
    for y in 0..seg.height() {
        for x in 0..seg.width() {
            let id = seg.get(x, y) as usize;
            if id == 0 {
                if mask.get(x, y) {
                    return false;
                }
                continue;
            }
            match state[id] {
                None => state[id] = Some(mask.get(x, y)),
                Some(s) if s != mask.get(x, y) => return false,
                _ => {}
            }
        }
    }
    true
}

pub fn is_subset(a: &ChangeMask, b: &ChangeMask) -> bool {
    a.values().iter().zip(b.values()).all(|(&p, &q)| p <= q)
}

pub fn iou(a: &ChangeMask, b: &ChangeMask) -> f64 {
    let (mut inter, mut union) = (0, 0);
    for (&p, &q) in a.values().iter().zip(b.values()) {
        inter += (p & q) as usize;
        union += (p | q) as usize;
    }
    inter as f64 / union as f64
}
