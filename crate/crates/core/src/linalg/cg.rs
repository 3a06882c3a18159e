//! Preconditioned conjugate gradients for symmetric positive definite systems.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::{axpy, dot, norm2, Real};

/// Relative tolerance for inner solves with the Laplacian form.
pub const DEFAULT_INNER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop once `||M x - b|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { rel_tol: DEFAULT_INNER_TOL, max_iter: 10_000, preconditioner: Preconditioner::Jacobi }
    }
}

impl CgOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final `||M x - b|| / ||b||` from the recurrence.
    pub residual: f64,
}

pub fn cg_solve<T: Real>(m: &CsrMatrix<T>, b: &[T], opts: &CgOptions) -> Result<CgOutcome<T>> {
    cg_solve_monitored(m, b, opts, |_, _| {})
}

/// As [`cg_solve`], calling `monitor(iteration, x)` after every update of the iterate.
pub fn cg_solve_monitored<T: Real>(
    m: &CsrMatrix<T>,
    b: &[T],
    opts: &CgOptions,
    mut monitor: impl FnMut(usize, &[T]),
) -> Result<CgOutcome<T>> {
    let n = m.order();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("right-hand side is not finite".into()));
    }
    let mut x = vec![T::zero(); n];
    let b_norm = norm2(b);
    if b_norm == T::zero() {
        return Ok(CgOutcome { x, iterations: 0, residual: 0.0 });
    }
    let inv_diag: Option<Vec<T>> = match opts.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(
            m.diagonal()
                .into_iter()
                .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
                .collect(),
        ),
    };
    let precondition = |r: &[T], z: &mut [T]| match &inv_diag {
        Some(inv) => z.iter_mut().zip(r.iter().zip(inv)).for_each(|(zi, (&ri, &di))| *zi = ri * di),
        None => z.copy_from_slice(r),
    };

    let tol = T::lit(opts.rel_tol) * b_norm;
    let mut r = b.to_vec();
    let mut z = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut mp = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut r_norm = b_norm;

    for it in 1..=opts.max_iter {
        m.spmv_into(&p, &mut mp);
        let curvature = dot(&p, &mp);
        if !(curvature > T::zero()) {
            return Err(Error::Indefinite { iteration: it, curvature: curvature.as_f64() });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &mp, &mut r);
        monitor(it, &x);
        r_norm = norm2(&r);
        if r_norm <= tol {
            return Ok(CgOutcome { x, iterations: it, residual: (r_norm / b_norm).as_f64() });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual: (r_norm / b_norm).as_f64() })
}

/// `u^T L v`.
pub fn l_inner<T: Real>(l: &CsrMatrix<T>, u: &[T], v: &[T]) -> Result<T> {
    l.quadratic_form(u, v)
}

/// `sqrt(u^T L u)`.
pub fn l_norm<T: Real>(l: &CsrMatrix<T>, u: &[T]) -> Result<T> {
    Ok(l_inner(l, u, u)?.max(T::zero()).sqrt())
}
