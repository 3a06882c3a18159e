//! Generalized symmetric eigensolvers for the pencil `A x = lambda L x`.

mod dense;
mod lobpcg;
mod tridiag;

use serde::Serialize;

pub use dense::{dense_generalized_eig, DenseOptions, DEFAULT_DENSE_CAP};
pub use lobpcg::{lobpcg, LobpcgOptions, Which};
pub use tridiag::{symmetric_eigen, SymmetricEigen, QL_SWEEPS_PER_EIGENVALUE};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::scalar::{dot, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    /// Cholesky reduction, Householder tridiagonalization, implicit QL.
    DenseCholeskyQl,
    Lobpcg,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResult<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// Columns are `L`-orthonormal eigenvectors, matching `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: Option<DenseMatrix<T>>,
    /// `||A x - lambda L x||_2 / ||L x||_2` per pair; empty without vectors.
    pub residuals: Vec<T>,
    pub method: EigenMethod,
    pub seed: Option<u64>,
    pub converged: bool,
    pub iterations: usize,
    pub timings: Timings,
}

impl<T: Real> EigenResult<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, j: usize) -> Result<Vec<T>> {
        let v = self.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)?;
        if j >= v.cols() {
            return Err(Error::IndexOutOfRange { index: j, len: v.cols() });
        }
        Ok(v.column(j))
    }
}

/// `(v^T A v) / (v^T L v)`.
pub fn rayleigh_quotient<T: Real>(a: &CsrMatrix<T>, l: &CsrMatrix<T>, v: &[T]) -> Result<T> {
    if v.iter().all(|x| *x == T::zero()) {
        return Err(Error::ZeroVector);
    }
    let num = a.quadratic_form(v, v)?;
    let den = l.quadratic_form(v, v)?;
    Ok(num / den)
}

/// `||A x - lambda L x||_2 / ||L x||_2`.
pub fn pair_residual<T: Real>(a: &CsrMatrix<T>, l: &CsrMatrix<T>, lambda: T, x: &[T]) -> Result<T> {
    let ax = a.spmv(x)?;
    let lx = l.spmv(x)?;
    let r: Vec<T> = ax.iter().zip(&lx).map(|(&p, &q)| p - lambda * q).collect();
    Ok(norm2(&r) / norm2(&lx))
}

/// Modified Gram-Schmidt in the `L` inner product, in column order.
pub(crate) fn l_orthonormalize_columns<T: Real>(l: &CsrMatrix<T>, v: &mut DenseMatrix<T>) {
    let k = v.cols();
    let mut cols: Vec<Vec<T>> = (0..k).map(|j| v.column(j)).collect();
    let mut lcols: Vec<Vec<T>> = Vec::with_capacity(k);
    for j in 0..k {
        for i in 0..j {
            let c = dot(&lcols[i], &cols[j]);
            let (done, rest) = cols.split_at_mut(j);
            crate::scalar::axpy(-c, &done[i], &mut rest[0]);
        }
        let lv = l.spmv(&cols[j]).expect("matching order");
        let nrm = dot(&lv, &cols[j]).sqrt();
        cols[j].iter_mut().for_each(|x| *x /= nrm);
        lcols.push(lv.into_iter().map(|x| x / nrm).collect());
    }
    for (j, c) in cols.iter().enumerate() {
        v.set_column(j, c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_quotient_basics() {
        let l = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)])
            .unwrap();
        let a = l.scaled(2.0);
        assert_eq!(rayleigh_quotient(&a, &l, &[0.3, -1.2]).unwrap(), 2.0);
        assert!(matches!(rayleigh_quotient(&a, &l, &[0.0, 0.0]), Err(Error::ZeroVector)));
        // (1,1) is an eigenvector of both with eigenvalue 1 -> quotient 2
        assert_eq!(pair_residual(&a, &l, 2.0, &[1.0, 1.0]).unwrap(), 0.0);
    }
}
