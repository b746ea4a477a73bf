use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    /// `k x dim`.
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after every assignment step, including the final one.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.rows()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid (lowest index on ties).
#[inline]
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Index of the first point whose cumulative weight exceeds `target`.
fn sample_by_weight(d2: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    for (i, &d) in d2.iter().enumerate() {
        acc += d;
        if acc > target && d > 0.0 {
            return i;
        }
    }
    d2.iter().rposition(|&d| d > 0.0).unwrap_or(d2.len() - 1)
}

/// Greedy k-means++: each new centroid is the best of `2 + ln k` candidates
/// drawn with probability proportional to squared distance.
fn plus_plus_init(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.rows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let pick = if total > 0.0 {
                sample_by_weight(&d2, rng.random::<f64>() * total)
            } else {
                rng.random_range(0..n)
            };
            let next: Vec<f64> = d2
                .iter()
                .enumerate()
                .map(|(i, &d)| d.min(sq_dist(x.row(i), x.row(pick))))
                .collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((pick, potential, next));
            }
        }
        let (pick, _, next) = best.expect("at least two trials");
        centroids.row_mut(j).copy_from_slice(x.row(pick));
        d2 = next;
    }
    centroids
}

/// Moves the point farthest from its centroid (taken from clusters with more
/// than one member) into each empty cluster.
fn repair_empty(x: &Matrix, labels: &mut [usize], centroids: &Matrix) {
    let k = centroids.rows();
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = (usize::MAX, -1.0);
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] > 1 {
                let d = sq_dist(x.row(i), centroids.row(l));
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        if far.0 == usize::MAX {
            return;
        }
        labels[far.0] = empty;
    }
}

fn cluster_means(x: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let mut sums = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            sums.row_mut(j).iter_mut().for_each(|s| *s /= c as f64);
        }
    }
    sums
}

/// Single-point transfers that strictly lower the inertia, repeated until
/// none is left. `centroids` must be the cluster means of `labels` and stays
/// so. Returns the number of moves.
#[allow(clippy::needless_range_loop)]
fn hartigan_transfers(x: &Matrix, labels: &mut [usize], centroids: &mut Matrix) -> usize {
    let k = centroids.rows();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let scale = 1e-12 * (1.0 + inertia_of(x, labels, centroids));
    let mut moves = 0;
    loop {
        let mut moved = false;
        for i in 0..x.rows() {
            let a = labels[i];
            if sizes[a] < 2 {
                continue;
            }
            let p = x.row(i);
            let na = sizes[a] as f64;
            let removal = na / (na - 1.0) * sq_dist(p, centroids.row(a));
            let mut best = (a, 0.0);
            for b in (0..k).filter(|&b| b != a) {
                let nb = sizes[b] as f64;
                let gain = nb / (nb + 1.0) * sq_dist(p, centroids.row(b)) - removal;
                if gain < best.1 - scale {
                    best = (b, gain);
                }
            }
            let b = best.0;
            if b == a {
                continue;
            }
            let nb = sizes[b] as f64;
            for (c, &v) in centroids.row_mut(a).iter_mut().zip(p) {
                *c = (*c * na - v) / (na - 1.0);
            }
            for (c, &v) in centroids.row_mut(b).iter_mut().zip(p) {
                *c = (*c * nb + v) / (nb + 1.0);
            }
            sizes[a] -= 1;
            sizes[b] += 1;
            labels[i] = b;
            moves += 1;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    if moves > 0 {
        *centroids = cluster_means(x, labels, k);
    }
    moves
}

fn inertia_of(x: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(x.row(i), centroids.row(l)))
        .sum()
}

/// k-means++ seeding followed by Lloyd iterations and a final pass of
/// Hartigan single-point transfers.
///
/// Stops when no centroid moves by `tol` or more (Euclidean), or after
/// `max_iter` update steps. Deterministic for a given `seed`.
pub fn kmeans(x: &Matrix, params: &KMeansParams, seed: u64) -> Result<KMeansResult> {
    let (n, k) = (x.rows(), params.k);
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let assign = |centroids: &Matrix| -> (Vec<usize>, f64) {
        let mut total = 0.0;
        let labels = (0..n)
            .map(|i| {
                let (j, d) = nearest(x.row(i), centroids);
                total += d;
                j
            })
            .collect();
        (labels, total)
    };

    for _ in 0..params.max_iter {
        let (mut labels, inertia) = assign(&centroids);
        history.push(inertia);
        iterations += 1;
        repair_empty(x, &mut labels, &centroids);
        let updated = cluster_means(x, &labels, k);
        let shift = (0..k)
            .map(|j| sq_dist(updated.row(j), centroids.row(j)).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < params.tol {
            converged = true;
            break;
        }
    }

    let (mut labels, inertia) = assign(&centroids);
    let before = labels.clone();
    repair_empty(x, &mut labels, &centroids);
    let inertia = if labels != before {
        centroids = cluster_means(x, &labels, k);
        inertia_of(x, &labels, &centroids)
    } else {
        inertia
    };
    history.push(inertia);
    centroids = cluster_means(x, &labels, k);
    if hartigan_transfers(x, &mut labels, &mut centroids) > 0 {
        history.push(inertia_of(x, &labels, &centroids));
    }

    Ok(KMeansResult {
        inertia: inertia_of(x, &labels, &centroids),
        centroids,
        labels,
        iterations,
        converged,
        inertia_history: history,
    })
}
