//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit-shift QL iteration (the EISPACK `tred2`/`tql2` pair).
//!
//! The working matrix is addressed column-major (`v(row, col) = data[col * n + row]`)
//! so the inner loops of both phases walk contiguous memory. On exit, row `j`
//! of the buffer holds the eigenvector of eigenvalue `j`.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Sweeps allowed per eigenvalue before the QL phase gives up.
pub const QL_SWEEPS_PER_EIGENVALUE: usize = 30;

pub struct SymmetricEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `j` is the unit eigenvector of `values[j]`.
    pub vectors: Option<DenseMatrix<T>>,
}

struct Work<T> {
    n: usize,
    v: Vec<T>,
    d: Vec<T>,
    e: Vec<T>,
}

impl<T: Real> Work<T> {
    #[inline]
    fn at(&self, row: usize, col: usize) -> T {
        self.v[col * self.n + row]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, x: T) {
        self.v[col * self.n + row] = x;
    }

    /// Householder tridiagonalization. Reads the lower triangle.
    fn tridiagonalize(&mut self, accumulate: bool) {
        let n = self.n;
        for j in 0..n {
            self.d[j] = self.at(n - 1, j);
        }
        for i in (1..n).rev() {
            let mut scale = T::zero();
            let mut h = T::zero();
            for k in 0..i {
                scale += self.d[k].abs();
            }
            if scale == T::zero() {
                self.e[i] = self.d[i - 1];
                for j in 0..i {
                    self.d[j] = self.at(i - 1, j);
                    self.set(i, j, T::zero());
                    self.set(j, i, T::zero());
                }
            } else {
                for k in 0..i {
                    self.d[k] /= scale;
                    h += self.d[k] * self.d[k];
                }
                let mut f = self.d[i - 1];
                let mut g = h.sqrt();
                if f > T::zero() {
                    g = -g;
                }
                self.e[i] = scale * g;
                h -= f * g;
                self.d[i - 1] = f - g;
                for j in 0..i {
                    self.e[j] = T::zero();
                }
                for j in 0..i {
                    f = self.d[j];
                    self.set(j, i, f);
                    g = self.e[j] + self.at(j, j) * f;
                    let col = &self.v[j * n..j * n + i];
                    for k in j + 1..i {
                        g += col[k] * self.d[k];
                        self.e[k] += col[k] * f;
                    }
                    self.e[j] = g;
                }
                f = T::zero();
                for j in 0..i {
                    self.e[j] /= h;
                    f += self.e[j] * self.d[j];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    self.e[j] -= hh * self.d[j];
                }
                for j in 0..i {
                    let f = self.d[j];
                    let g = self.e[j];
                    let col = &mut self.v[j * n..j * n + i];
                    for k in j..i {
                        col[k] -= f * self.e[k] + g * self.d[k];
                    }
                    self.d[j] = self.at(i - 1, j);
                    self.set(i, j, T::zero());
                }
            }
            self.d[i] = h;
        }

        if !accumulate {
            for j in 0..n {
                self.d[j] = self.at(j, j);
            }
            self.e[0] = T::zero();
            return;
        }

        for i in 0..n - 1 {
            let diag = self.at(i, i);
            self.set(n - 1, i, diag);
            self.set(i, i, T::one());
            let h = self.d[i + 1];
            if h != T::zero() {
                for k in 0..=i {
                    self.d[k] = self.at(k, i + 1) / h;
                }
                for j in 0..=i {
                    let mut g = T::zero();
                    for k in 0..=i {
                        g += self.at(k, i + 1) * self.at(k, j);
                    }
                    for k in 0..=i {
                        let x = self.at(k, j) - g * self.d[k];
                        self.set(k, j, x);
                    }
                }
            }
            for k in 0..=i {
                self.set(k, i + 1, T::zero());
            }
        }
        for j in 0..n {
            self.d[j] = self.at(n - 1, j);
            self.set(n - 1, j, T::zero());
        }
        self.set(n - 1, n - 1, T::one());
        self.e[0] = T::zero();
    }

    /// Implicit-shift QL on the tridiagonal `(d, e)`.
    fn ql(&mut self, vectors: bool) -> Result<()> {
        let n = self.n;
        for i in 1..n {
            self.e[i - 1] = self.e[i];
        }
        self.e[n - 1] = T::zero();

        let budget = QL_SWEEPS_PER_EIGENVALUE * n;
        let mut sweeps = 0usize;
        let eps = T::epsilon();
        let two = T::lit(2.0);
        let mut f = T::zero();
        let mut tst1 = T::zero();
        for l in 0..n {
            tst1 = tst1.max(self.d[l].abs() + self.e[l].abs());
            let mut m = l;
            while m < n - 1 && self.e[m].abs() > eps * tst1 {
                m += 1;
            }
            if m > l {
                loop {
                    sweeps += 1;
                    if sweeps > budget {
                        return Err(Error::QlNoConvergence { budget });
                    }
                    let g = self.d[l];
                    let mut p = (self.d[l + 1] - g) / (two * self.e[l]);
                    let mut r = p.hypot(T::one());
                    if p < T::zero() {
                        r = -r;
                    }
                    self.d[l] = self.e[l] / (p + r);
                    self.d[l + 1] = self.e[l] * (p + r);
                    let dl1 = self.d[l + 1];
                    let mut h = g - self.d[l];
                    for i in l + 2..n {
                        self.d[i] -= h;
                    }
                    f += h;

                    p = self.d[m];
                    let mut c = T::one();
                    let mut c2 = c;
                    let mut c3 = c;
                    let el1 = self.e[l + 1];
                    let mut s = T::zero();
                    let mut s2 = T::zero();
                    for i in (l..m).rev() {
                        c3 = c2;
                        c2 = c;
                        s2 = s;
                        let g = c * self.e[i];
                        h = c * p;
                        r = p.hypot(self.e[i]);
                        self.e[i + 1] = s * r;
                        s = self.e[i] / r;
                        c = p / r;
                        p = c * self.d[i] - s * g;
                        self.d[i + 1] = h + s * (c * g + s * self.d[i]);
                        if vectors {
                            let (left, right) = self.v.split_at_mut((i + 1) * n);
                            let vi = &mut left[i * n..];
                            let vi1 = &mut right[..n];
                            for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                                let hb = *b;
                                *b = s * *a + c * hb;
                                *a = c * *a - s * hb;
                            }
                        }
                    }
                    p = -s * s2 * c3 * el1 * self.e[l] / dl1;
                    self.e[l] = s * p;
                    self.d[l] = c * p;
                    if self.e[l].abs() <= eps * tst1 {
                        break;
                    }
                }
            }
            self.d[l] += f;
            self.e[l] = T::zero();
        }
        Ok(())
    }
}

/// All eigenvalues (ascending) and optionally orthonormal eigenvectors of a symmetric matrix.
///
/// Only the lower triangle of `a` is read.
pub fn symmetric_eigen<T: Real>(a: &DenseMatrix<T>, want_vectors: bool) -> Result<SymmetricEigen<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(SymmetricEigen { values: Vec::new(), vectors: want_vectors.then(|| DenseMatrix::zeros(0, 0)) });
    }
    // Row-major lower triangle read as column-major upper triangle; symmetric either way.
    let mut w = Work { n, v: a.as_slice().to_vec(), d: vec![T::zero(); n], e: vec![T::zero(); n] };
    // The algorithm reads v(row, col) for row >= col; make the buffer hold the lower triangle
    // of `a` in that addressing.
    for col in 0..n {
        for row in col..n {
            w.v[col * n + row] = a[(row, col)];
        }
    }
    w.tridiagonalize(want_vectors);
    w.ql(want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w.d[i].partial_cmp(&w.d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| w.d[i]).collect();
    let vectors = want_vectors.then(|| {
        let mut m = DenseMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            // eigenvector `src` is column `src` of V, i.e. row `src` of the buffer
            m.set_column(dst, &w.v[src * n..(src + 1) * n]);
        }
        m
    });
    Ok(SymmetricEigen { values, vectors })
}
