//! Closed-form spectrum of the pencil for constant diagonal `K`.
//!
//! With constant coefficients the Q1 stiffness and Laplacian on a box grid are
//! Kronecker sums of 1D stiffness and mass matrices, and both are diagonalized
//! by the same tensor-product sine modes. Mode `(p, q, r)` has eigenvalue
//!
//! ```text
//! (k1 s_p m_q m_r + k2 m_p s_q m_r + k3 m_p m_q s_r) / (s_p m_q m_r + m_p s_q m_r + m_p m_q s_r)
//! ```
//!
//! where `s_j`, `m_j` are the 1D stiffness and mass eigenvalues of mode `j`.
//! The 1D values are computed numerically from explicitly written tridiagonal
//! matrices, not from the assembly module. The identity is exact when the
//! assembly integrates Q1 products exactly (two-point Gauss rule).

use crate::eig::symmetric_eigen;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mesh::StructuredGrid;
use crate::scalar::Real;

/// Mode values of the 1D Q1 stiffness and mass matrices on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeValues<T> {
    /// `s_j` for `j = 1..cells-1`, ascending.
    pub stiffness: Vec<T>,
    /// `m_j`, matched to `stiffness`.
    pub mass: Vec<T>,
}

/// 1D interior stiffness `(1/h) tridiag(-1, 2, -1)` of order `cells - 1`.
pub fn stiffness_1d<T: Real>(cells: usize, h: T) -> DenseMatrix<T> {
    tridiagonal(cells - 1, T::lit(2.0) / h, -T::one() / h)
}

/// 1D interior mass `(h/6) tridiag(1, 4, 1)` of order `cells - 1`.
pub fn mass_1d<T: Real>(cells: usize, h: T) -> DenseMatrix<T> {
    tridiagonal(cells - 1, T::lit(4.0) * h / T::lit(6.0), h / T::lit(6.0))
}

fn tridiagonal<T: Real>(n: usize, diag: T, off: T) -> DenseMatrix<T> {
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag;
        if i > 0 {
            m[(i, i - 1)] = off;
            m[(i - 1, i)] = off;
        }
    }
    m
}

/// Eigen-decomposes the 1D stiffness matrix and evaluates the mass matrix's
/// Rayleigh quotient on each eigenvector.
pub fn q1_modes_1d<T: Real>(cells: usize, length: T) -> Result<ModeValues<T>> {
    if cells < 2 {
        return Err(Error::TooFewCells { axis: 0, cells });
    }
    let h = length / T::from_usize_lossy(cells);
    let s = stiffness_1d(cells, h);
    let m = mass_1d(cells, h);
    let eig = symmetric_eigen(&s, true)?;
    let vectors = eig.vectors.expect("requested");
    let mass = (0..cells - 1)
        .map(|j| {
            let v = vectors.column(j);
            let mv = m.matvec(&v)?;
            Ok(crate::scalar::dot(&v, &mv) / crate::scalar::dot(&v, &v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeValues { stiffness: eig.values, mass })
}

/// All generalized eigenvalues, ascending, for `K = diag(k)` on `grid`.
pub fn tensor_product_eigenvalues<T: Real>(grid: &StructuredGrid<T>, k: &[T]) -> Result<Vec<T>> {
    let d = grid.dim();
    if k.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: k.len() });
    }
    let modes = (0..d)
        .map(|a| q1_modes_1d(grid.cells()[a], grid.domain().extent(a)))
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = modes.iter().map(|m| m.stiffness.len()).collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut num = T::zero();
        let mut den = T::zero();
        for a in 0..d {
            let mut term = modes[a].stiffness[idx[a]];
            for b in (0..d).filter(|&b| b != a) {
                term *= modes[b].mass[idx[b]];
            }
            num += k[a] * term;
            den += term;
        }
        out.push(num / den);
        for a in 0..d {
            idx[a] += 1;
            if idx[a] < counts[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// `max_j |computed_j - oracle_j| / |oracle_j|` over two ascending lists.
pub fn max_relative_mismatch<T: Real>(computed: &[T], oracle: &[T]) -> Result<T> {
    if computed.len() != oracle.len() {
        return Err(Error::DimensionMismatch { expected: oracle.len(), got: computed.len() });
    }
    Ok(computed
        .iter()
        .zip(oracle)
        .map(|(&c, &o)| (c - o).abs() / o.abs())
        .fold(T::zero(), T::max))
}
