use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Square sparse matrix in compressed sparse row layout.
///
/// Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn from_parts(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 {
            return Err(Error::InvalidArgument(format!(
                "row_ptr must have {} entries starting at 0",
                n + 1
            )));
        }
        if col_idx.len() != values.len() || row_ptr[n] != col_idx.len() {
            return Err(Error::InvalidArgument("row_ptr, col_idx and values disagree".into()));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidArgument(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: column indices must be strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= n {
                    return Err(Error::IndexOutOfRange { index: c, len: n });
                }
            }
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = triplets[k];
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
            }
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::from_parts(n, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Matrix of order `n` with no stored entries.
    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Zero-valued matrix with a prescribed sparsity pattern.
    pub(crate) fn with_pattern(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        let nnz = col_idx.len();
        Self { n, row_ptr, col_idx, values: vec![T::zero(); nnz] }
    }

    /// Adds `v` to the stored entry `(i, j)`; the entry must be in the pattern.
    #[inline]
    pub(crate) fn add_at(&mut self, i: usize, j: usize, v: T) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let k = self.col_idx[lo..hi].binary_search(&j).expect("entry in sparsity pattern");
        self.values[lo + k] += v;
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(T::zero(), |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = M x`, accumulating each row in ascending column order.
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let mut y = vec![T::zero(); self.n];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked `y = M x`; lengths must equal the order.
    #[inline]
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `x^T M y`.
    pub fn quadratic_form(&self, x: &[T], y: &[T]) -> Result<T> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: y.len() });
        }
        let my = self.spmv(x)?;
        Ok(crate::scalar::dot(&my, y))
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| {
                let (cj, vj) = self.row(j);
                cj.binary_search(&i).is_ok_and(|k| vj[k] == v)
            })
        })
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// `alpha * a + beta * b` on the union of both patterns.
    pub fn linear_combination(alpha: T, a: &Self, beta: T, b: &Self) -> Result<Self> {
        if a.n != b.n {
            return Err(Error::DimensionMismatch { expected: a.n, got: b.n });
        }
        let n = a.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(a.nnz().max(b.nnz()));
        let mut values = Vec::with_capacity(a.nnz().max(b.nnz()));
        row_ptr.push(0);
        for i in 0..n {
            let (ca, va) = a.row(i);
            let (cb, vb) = b.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja == jb {
                    col_idx.push(ja);
                    values.push(alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                } else if ja < jb {
                    col_idx.push(ja);
                    values.push(alpha * va[p]);
                    p += 1;
                } else {
                    col_idx.push(jb);
                    values.push(beta * vb[q]);
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Plain-text coordinate export: one `i j value` line per stored entry, 1-based.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}
