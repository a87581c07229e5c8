//! Small dense linear algebra: row-major matrices, Cholesky solves and a
//! diagonally pivoted Cholesky for positive semi-definite factors.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix<T>) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::config(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Largest absolute entry of `self - self^T`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::config("Cholesky needs a square matrix"));
        }
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::numerical(format!("matrix not positive definite (pivot {j} = {d})")));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { lower: l })
    }

    /// Factorizes `a`; on failure retries once with `1e-10 * trace / n`
    /// added to the diagonal. Returns the factor and the jitter used.
    pub fn with_jitter(a: &Matrix<T>) -> Result<(Self, T)> {
        match Self::new(a) {
            Ok(c) => Ok((c, T::zero())),
            Err(first) => {
                let n = a.rows.max(1);
                let jitter = T::lit(1e-10) * a.trace().abs() / T::from_count(n);
                if !(jitter > T::zero()) {
                    return Err(first);
                }
                let mut b = a.clone();
                for i in 0..a.rows {
                    b[(i, i)] += jitter;
                }
                Self::new(&b).map(|c| (c, jitter)).map_err(|e| {
                    Error::numerical(format!("innovation covariance singular even with jitter {jitter}: {e}"))
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.lower.rows;
        assert_eq!(b.len(), n, "rhs length mismatch");
        let l = &self.lower;
        for i in 0..n {
            let s = b[i] - dot(&l.row(i)[..i], &b[..i]);
            b[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * b[k];
            }
            b[i] = s / l[(i, i)];
        }
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = T::zero());
            col[j] = T::one();
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Factor `F` (n x rank) with `F F^T = A` for a symmetric positive
/// semi-definite `A`, from a diagonally pivoted Cholesky decomposition.
///
/// Fails with a configuration error when `A` has a clearly negative
/// direction, i.e. a remaining pivot below `-tol * max diag`.
pub fn psd_factor<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows != a.cols {
        return Err(Error::config("covariance must be square"));
    }
    let n = a.rows;
    let scale = a.diagonal().into_iter().fold(T::zero(), |m, d| m.max(d.abs()));
    if a.asymmetry() > T::lit(1e-10) * scale.max(T::one()) {
        return Err(Error::config("covariance matrix is not symmetric"));
    }
    if scale == T::zero() {
        if a.max_abs() > T::zero() {
            return Err(Error::config("covariance has zero diagonal but nonzero off-diagonal entries"));
        }
        return Ok(Matrix::zeros(n, 0));
    }
    let tol = T::lit(1e-12) * scale * T::from_count(n.max(1));
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    // columns of the factor in pivoted order, stored row-major n x n then truncated
    let mut l = Matrix::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        let (mut best, mut best_val) = (k, work[(perm[k], perm[k])]);
        for j in (k + 1)..n {
            let v = work[(perm[j], perm[j])];
            if v > best_val {
                best = j;
                best_val = v;
            }
        }
        if best_val <= tol {
            let worst = (k..n).map(|j| work[(perm[j], perm[j])]).fold(T::zero(), |m, v| m.min(v));
            if worst < -tol {
                return Err(Error::config(format!(
                    "covariance matrix is not positive semi-definite (residual pivot {worst})"
                )));
            }
            break;
        }
        perm.swap(k, best);
        let pk = perm[k];
        let d = best_val.sqrt();
        l[(pk, k)] = d;
        for &pi in &perm[(k + 1)..] {
            l[(pi, k)] = work[(pi, pk)] / d;
        }
        for &pi in &perm[(k + 1)..] {
            let li = l[(pi, k)];
            if li == T::zero() {
                continue;
            }
            for &pj in &perm[(k + 1)..] {
                work[(pi, pj)] -= li * l[(pj, k)];
            }
        }
        rank += 1;
    }
    Ok(Matrix::from_fn(n, rank, |i, j| l[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix<f64> {
        let b = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 1.0 } else { 0.0 });
        let mut a = b.matmul(&b.transpose()).unwrap();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_solves() {
        let a = spd(6);
        let chol = Cholesky::new(&a).unwrap();
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let mut b = a.mul_vec(&x);
        chol.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
        let inv = chol.inverse();
        let id = a.matmul(&inv).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        let ones = Matrix::from_fn(3, 3, |_, _| 1.0f64);
        assert!(Cholesky::new(&ones).is_err());
        let (_, jitter) = Cholesky::with_jitter(&ones).unwrap();
        assert!((jitter - 1e-10).abs() < 1e-22);
    }

    #[test]
    fn psd_factor_of_rank_one_ones() {
        let ones = Matrix::from_fn(4, 4, |_, _| 1e-4f64);
        let f = psd_factor(&ones).unwrap();
        assert_eq!(f.cols(), 1);
        let back = f.matmul(&f.transpose()).unwrap();
        for (u, v) in back.as_slice().iter().zip(ones.as_slice()) {
            assert!((u - v).abs() < 1e-18);
        }
    }

    #[test]
    fn psd_factor_reconstructs_full_rank() {
        let a = spd(5);
        let f = psd_factor(&a).unwrap();
        assert_eq!(f.cols(), 5);
        let back = f.matmul(&f.transpose()).unwrap();
        for (u, v) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let a = Matrix::from_row_major(2, 2, vec![1.0f64, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(psd_factor(&a), Err(Error::Config(_))));
        let neg = Matrix::from_diagonal(&[1.0f64, -1.0]);
        assert!(matches!(psd_factor(&neg), Err(Error::Config(_))));
    }
}
