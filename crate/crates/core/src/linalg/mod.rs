//! Sparse and dense kernels: CSR storage, conjugate gradients, dense Cholesky,
//! and the inner product induced by the Laplacian form.

mod cg;
mod csr;
mod dense;

pub use cg::{
    cg_solve, cg_solve_monitored, l_inner, l_norm, CgOptions, CgOutcome, Preconditioner,
    DEFAULT_INNER_TOL,
};
pub use csr::CsrMatrix;
pub use dense::{cholesky_dense, upper_triangular_inverse, DenseMatrix};
