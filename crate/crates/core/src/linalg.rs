//! Dense linear algebra used by PCA, IRMAD and SFA.
//!
//! Everything here works on small-to-medium row-major `f64` matrices:
//! one-sided Jacobi SVD, cyclic Jacobi for symmetric eigenproblems, Cholesky,
//! and a randomized range finder for the top singular vectors of wide inputs.

use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Row-major constructor. Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape");
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Symmetrizes in place as `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                let v = 0.5 * (self[(r, c)] + self[(c, r)]);
                self[(r, c)] = v;
                self[(c, r)] = v;
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = (0..self.rows()).map(|r| self.row(r)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        let n = rows.len();
        Ok(Matrix::from_vec(n, cols, rows.into_iter().flatten().collect()))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Result of a symmetric eigendecomposition.
///
/// `values` are ascending; `vectors` holds the matching unit eigenvectors as
/// columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> SymmetricEigen {
    assert_eq!(a.rows, a.cols, "symmetric_eigen needs a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)] * m[(p, q)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    SymmetricEigen {
        values: order.iter().map(|&i| m[(i, i)]).collect(),
        vectors: Matrix::from_fn(n, n, |r, c| v[(r, order[c])]),
    }
}

/// Lower-triangular Cholesky factor, or `None` if `a` is not positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = vec![0.0; n];
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &x[..i]);
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transposed(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// `L⁻¹ A L⁻ᵀ` for a lower-triangular Cholesky factor `L`.
pub fn whiten_symmetric(l: &Matrix, a: &Matrix) -> Matrix {
    let n = l.rows;
    // Y = L⁻¹ A, column by column.
    let mut y = Matrix::zeros(n, n);
    for c in 0..n {
        let col = solve_lower(l, &a.column(c));
        for r in 0..n {
            y[(r, c)] = col[r];
        }
    }
    // C = Y L⁻ᵀ = (L⁻¹ Yᵀ)ᵀ.
    let yt = y.transpose();
    let mut out = Matrix::zeros(n, n);
    for c in 0..n {
        let col = solve_lower(l, &yt.column(c));
        for r in 0..n {
            out[(c, r)] = col[r];
        }
    }
    out.symmetrize();
    out
}

/// Leading singular triplets: `values` descending, `right` holds the unit
/// right singular vectors (length `cols`).
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub values: Vec<f64>,
    pub right: Vec<Vec<f64>>,
}

/// One-sided Jacobi on the columns of `a`, stored column-major in `cols`.
///
/// Returns the column norms (singular values, unsorted), the rotated columns
/// and the accumulated rotation (`v`, row-major `n x n`).
fn one_sided_jacobi(mut cols: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>, Matrix) {
    let n = cols.len();
    let mut v = Matrix::identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms = cols.iter().map(|c| norm(c)).collect();
    (norms, cols, v)
}

/// Exact SVD of `a` via one-sided Jacobi, keeping the leading `k` triplets.
pub fn svd_jacobi(a: &Matrix, k: usize) -> TruncatedSvd {
    let (rows, cols) = (a.rows, a.cols);
    let k = k.min(rows.min(cols));
    if cols <= rows {
        // Rotate the columns of A: A V = U S, right vectors are columns of V.
        let columns = (0..cols).map(|c| a.column(c)).collect();
        let (s, _, v) = one_sided_jacobi(columns);
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        TruncatedSvd {
            values: order[..k].iter().map(|&i| s[i]).collect(),
            right: order[..k].iter().map(|&i| v.column(i)).collect(),
        }
    } else {
        // Rotate the columns of Aᵀ: Aᵀ W = U' S, and U' holds A's right vectors.
        let columns = (0..rows).map(|r| a.row(r).to_vec()).collect();
        let (s, rotated, _) = one_sided_jacobi(columns);
        let mut order: Vec<usize> = (0..rows).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        TruncatedSvd {
            values: order[..k].iter().map(|&i| s[i]).collect(),
            right: order[..k]
                .iter()
                .map(|&i| unit_or_basis(&rotated[i], s[i], i))
                .collect(),
        }
    }
}

fn unit_or_basis(v: &[f64], n: f64, fallback: usize) -> Vec<f64> {
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        let mut e = vec![0.0; v.len()];
        e[fallback % v.len()] = 1.0;
        e
    }
}

/// Modified Gram-Schmidt (applied twice) on the columns of `q` (`rows x k`,
/// row-major). Columns that collapse are replaced by zeros.
fn orthonormalize_columns(q: &mut Matrix) {
    let (rows, k) = (q.rows, q.cols);
    for _pass in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let proj: f64 = (0..rows).map(|r| q[(r, i)] * q[(r, j)]).sum();
                for r in 0..rows {
                    let qi = q[(r, i)];
                    q[(r, j)] -= proj * qi;
                }
            }
            let n: f64 = (0..rows).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
            for r in 0..rows {
                q[(r, j)] = if n > 1e-300 { q[(r, j)] / n } else { 0.0 };
            }
        }
    }
}

/// Leading `k` right singular triplets via randomized subspace iteration.
///
/// Used when both sides of `a` are large. The seed is fixed so results are
/// reproducible; iteration stops once the leading values settle to 1e-13
/// relative.
pub fn svd_randomized(a: &Matrix, k: usize, seed: u64) -> TruncatedSvd {
    let (rows, cols) = (a.rows, a.cols);
    let k = k.min(rows.min(cols));
    let width = (k + 10).min(rows.min(cols));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Matrix::from_fn(cols, width, |_, _| rng.random_range(-1.0..1.0));
    let at = a.transpose();
    let mut q = a.matmul(&omega);
    orthonormalize_columns(&mut q);
    let mut last: Vec<f64> = Vec::new();
    for _ in 0..200 {
        let mut z = at.matmul(&q);
        orthonormalize_columns(&mut z);
        q = a.matmul(&z);
        orthonormalize_columns(&mut q);
        // B = Qᵀ A (width x cols); its leading singular values approximate A's.
        let b = q.transpose().matmul(a);
        let svd = svd_jacobi(&b, k);
        let settled = last.len() == svd.values.len()
            && svd
                .values
                .iter()
                .zip(&last)
                .all(|(x, y)| (x - y).abs() <= 1e-13 * x.abs().max(1e-300));
        last = svd.values.clone();
        if settled {
            return svd;
        }
    }
    svd_jacobi(&q.transpose().matmul(a), k)
}
