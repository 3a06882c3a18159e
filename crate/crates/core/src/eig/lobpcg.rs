use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{l_orthonormalize_columns, pair_residual, symmetric_eigen, EigenMethod, EigenResult, Timings};
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, CgOptions, CsrMatrix, DenseMatrix, Preconditioner};
use crate::scalar::{axpy, dot, norm2, Real};

/// Extra Ritz vectors carried alongside the requested block.
const GUARD_VECTORS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Smallest,
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobpcgOptions {
    pub block: usize,
    pub which: Which,
    /// Per-pair relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Relative tolerance of the inner CG solve with `L` used as preconditioner.
    pub precond_tol: f64,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self { block: 5, which: Which::Smallest, tol: 1e-8, max_iter: 500, seed: 0, precond_tol: 1e-6 }
    }
}

/// A set of `L`-orthonormal columns together with their images under `L`.
struct Basis<T> {
    q: Vec<Vec<T>>,
    lq: Vec<Vec<T>>,
}

impl<T: Real> Basis<T> {
    fn new() -> Self {
        Self { q: Vec::new(), lq: Vec::new() }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// Classical Gram-Schmidt applied twice. Returns false when `v` is
    /// numerically dependent on the basis and was dropped.
    fn push(&mut self, l: &CsrMatrix<T>, mut v: Vec<T>) -> bool {
        let mut lv = l.spmv(&v).expect("matching order");
        let norm0 = dot(&v, &lv).max(T::zero()).sqrt();
        if !(norm0 > T::zero()) || !norm0.is_finite() {
            return false;
        }
        for _ in 0..2 {
            let coef: Vec<T> = self.lq.iter().map(|lq| dot(lq, &v)).collect();
            for ((q, lq), &c) in self.q.iter().zip(&self.lq).zip(&coef) {
                axpy(-c, q, &mut v);
                axpy(-c, lq, &mut lv);
            }
        }
        let norm = dot(&v, &lv).max(T::zero()).sqrt();
        if !(norm > T::epsilon().powf(T::lit(0.6)) * norm0) {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        lv.iter_mut().for_each(|x| *x /= norm);
        self.q.push(v);
        self.lq.push(lv);
        true
    }
}

/// `sum_i c[i][col] * cols[i]` for the given coefficient column.
fn combine<T: Real>(cols: &[Vec<T>], coef: &DenseMatrix<T>, col: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (i, c) in cols.iter().enumerate() {
        axpy(coef[(i, col)], c, &mut out);
    }
    out
}

/// Extreme eigenpairs of `A x = lambda L x` by the locally optimal block
/// preconditioned conjugate gradient method.
///
/// The preconditioner applies `L^{-1}` approximately through CG. Columns whose
/// residual is below `tol` are soft-locked: they stay in the Rayleigh-Ritz
/// basis but contribute no new search directions. If `max_iter` is reached the
/// current iterate is returned with `converged == false`.
pub fn lobpcg<T: Real>(a: &CsrMatrix<T>, l: &CsrMatrix<T>, opts: &LobpcgOptions) -> Result<EigenResult<T>> {
    let start = Instant::now();
    let n = a.order();
    if l.order() != n {
        return Err(Error::DimensionMismatch { expected: n, got: l.order() });
    }
    let k = opts.block;
    if k == 0 || k > n {
        return Err(Error::InvalidBlock { block: k, n });
    }
    // Largest eigenpairs of (A, L) are the smallest of (-A, L).
    let flipped;
    let op = match opts.which {
        Which::Smallest => a,
        Which::Largest => {
            flipped = a.scaled(-T::one());
            &flipped
        }
    };
    let m = (k + GUARD_VECTORS).min(n);
    let tol = T::lit(opts.tol);
    let cg_opts = CgOptions { rel_tol: opts.precond_tol, preconditioner: Preconditioner::Jacobi, ..CgOptions::default() };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis::new();
    let mut attempts = 0;
    while basis.len() < m {
        attempts += 1;
        if attempts > 10 * m {
            return Err(Error::InvalidBlock { block: m, n });
        }
        let v: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        basis.push(l, v);
    }

    let mut x = basis.q;
    let mut p: Option<Vec<Vec<T>>> = None;
    let mut lambda = vec![T::zero(); m];
    let mut residuals = vec![T::infinity(); m];
    let mut converged = false;
    let mut iterations = 0;

    // Initial Rayleigh-Ritz on span(X).
    {
        let ax: Vec<Vec<T>> = x.iter().map(|v| op.spmv(v).expect("order")).collect();
        let g = gram(&x, &ax);
        let eig = symmetric_eigen(&g, true)?;
        let c = eig.vectors.expect("requested");
        x = (0..m).map(|j| combine(&x, &c, j, n)).collect();
        lambda.copy_from_slice(&eig.values[..m]);
    }

    loop {
        let ax: Vec<Vec<T>> = x.iter().map(|v| op.spmv(v).expect("order")).collect();
        let lx: Vec<Vec<T>> = x.iter().map(|v| l.spmv(v).expect("order")).collect();
        let r: Vec<Vec<T>> = (0..m)
            .map(|j| ax[j].iter().zip(&lx[j]).map(|(&p, &q)| p - lambda[j] * q).collect())
            .collect();
        for j in 0..m {
            residuals[j] = norm2(&r[j]) / norm2(&lx[j]);
        }
        if residuals[..k].iter().all(|&res| res <= tol) {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let active: Vec<usize> = (0..m).filter(|&j| residuals[j] > tol).collect();
        let mut s = Basis::new();
        for (q, lq) in x.iter().zip(&lx) {
            s.q.push(q.clone());
            s.lq.push(lq.clone());
        }
        for &j in &active {
            let w = match cg_solve(l, &r[j], &cg_opts) {
                Ok(out) => out.x,
                Err(_) => r[j].clone(),
            };
            s.push(l, w);
        }
        if let Some(p) = &p {
            for &j in &active {
                s.push(l, p[j].clone());
            }
        }

        let as_: Vec<Vec<T>> = s.q.iter().map(|v| op.spmv(v).expect("order")).collect();
        let g = gram(&s.q, &as_);
        let eig = symmetric_eigen(&g, true)?;
        let c = eig.vectors.expect("requested");
        let rest = &s.q[m..];
        let mut new_p = Vec::with_capacity(m);
        let mut new_x = Vec::with_capacity(m);
        for j in 0..m {
            let mut pj = vec![T::zero(); n];
            for (i, v) in rest.iter().enumerate() {
                axpy(c[(m + i, j)], v, &mut pj);
            }
            let mut xj = pj.clone();
            for (i, v) in s.q[..m].iter().enumerate() {
                axpy(c[(i, j)], v, &mut xj);
            }
            new_p.push(pj);
            new_x.push(xj);
        }
        x = new_x;
        p = Some(new_p);
        lambda.copy_from_slice(&eig.values[..m]);
    }

    let sign = match opts.which {
        Which::Smallest => T::one(),
        Which::Largest => -T::one(),
    };
    let mut v = DenseMatrix::from_columns(&x[..k])?;
    l_orthonormalize_columns(l, &mut v);
    let mut pairs: Vec<(T, Vec<T>)> = (0..k).map(|j| (sign * lambda[j], v.column(j))).collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let columns: Vec<Vec<T>> = pairs.into_iter().map(|p| p.1).collect();
    let residuals = eigenvalues
        .iter()
        .zip(&columns)
        .map(|(&lam, x)| pair_residual(a, l, lam, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenResult {
        eigenvalues,
        eigenvectors: Some(DenseMatrix::from_columns(&columns)?),
        residuals,
        method: EigenMethod::Lobpcg,
        seed: Some(opts.seed),
        converged,
        iterations,
        timings: Timings { seconds: start.elapsed().as_secs_f64() },
    })
}

/// Symmetrized `Q^T (A Q)`.
fn gram<T: Real>(q: &[Vec<T>], aq: &[Vec<T>]) -> DenseMatrix<T> {
    let s = q.len();
    let mut g = DenseMatrix::zeros(s, s);
    let half = T::lit(0.5);
    for i in 0..s {
        for j in 0..=i {
            let v = (dot(&q[i], &aq[j]) + dot(&q[j], &aq[i])) * half;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}
