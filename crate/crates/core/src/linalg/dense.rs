use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, got: bad.len() });
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::DimensionMismatch { expected: rows, got: c.len() });
            }
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows).map(|i| crate::scalar::dot(self.row(i), x)).collect())
    }

    pub fn frobenius_norm(&self) -> T {
        crate::scalar::norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Upper-triangular `R` with `M = R^T R`.
///
/// Only the upper triangle of `m` is read.
pub fn cholesky_dense<T: Real>(m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.rows(), got: m.cols() });
    }
    let n = m.rows();
    let mut r = DenseMatrix::zeros(n, n);
    for i in 0..n {
        // r_ii^2 = m_ii - sum_k r_ki^2
        let mut d = m[(i, i)];
        for k in 0..i {
            d -= r[(k, i)] * r[(k, i)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: i, value: d.as_f64() });
        }
        let rii = d.sqrt();
        r[(i, i)] = rii;
        // row i of R: r_ij = (m_ij - sum_k r_ki r_kj) / r_ii
        let mut row: Vec<T> = m.row(i)[i + 1..].to_vec();
        for k in 0..i {
            let rki = r[(k, i)];
            if rki == T::zero() {
                continue;
            }
            for (x, &rkj) in row.iter_mut().zip(&r.row(k)[i + 1..]) {
                *x -= rki * rkj;
            }
        }
        for (dst, x) in r.row_mut(i)[i + 1..].iter_mut().zip(row) {
            *dst = x / rii;
        }
    }
    Ok(r)
}

/// Inverse of an upper-triangular matrix with nonzero diagonal.
pub fn upper_triangular_inverse<T: Real>(r: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = r.rows();
    let mut inv = DenseMatrix::zeros(n, n);
    // Row i of X = R^{-1}: (e_i - sum_{k>i} r_ik X_k) / r_ii, bottom row first.
    let mut acc = vec![T::zero(); n];
    for i in (0..n).rev() {
        acc.iter_mut().for_each(|v| *v = T::zero());
        acc[i] = T::one();
        for k in i + 1..n {
            let rik = r[(i, k)];
            if rik == T::zero() {
                continue;
            }
            for (a, &x) in acc[k..].iter_mut().zip(&inv.row(k)[k..]) {
                *a -= rik * x;
            }
        }
        let rii = r[(i, i)];
        for (dst, &a) in inv.row_mut(i)[i..].iter_mut().zip(&acc[i..]) {
            *dst = a / rii;
        }
    }
    inv
}
