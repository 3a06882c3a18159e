use std::time::Instant;

use super::{l_orthonormalize_columns, pair_residual, symmetric_eigen, EigenMethod, EigenResult, Timings};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_dense, upper_triangular_inverse, CsrMatrix, DenseMatrix};
use crate::scalar::Real;

/// Largest order accepted by the dense path (about 16^3 interior nodes).
pub const DEFAULT_DENSE_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseOptions {
    pub cap: usize,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_DENSE_CAP }
    }
}

/// Full spectrum of `A x = lambda L x` with `L` positive definite.
///
/// Factors `L = R^T R`, forms `C = R^{-T} A R^{-1}`, and solves the symmetric
/// problem for `C`. Eigenvectors are mapped back with `x = R^{-1} y` and
/// re-orthonormalized in the `L` inner product.
pub fn dense_generalized_eig<T: Real>(
    a: &CsrMatrix<T>,
    l: &CsrMatrix<T>,
    want_vectors: bool,
    opts: &DenseOptions,
) -> Result<EigenResult<T>> {
    let start = Instant::now();
    let n = a.order();
    if l.order() != n {
        return Err(Error::DimensionMismatch { expected: n, got: l.order() });
    }
    if n > opts.cap {
        return Err(Error::DenseCapExceeded { n, cap: opts.cap });
    }
    let r = cholesky_dense(&l.to_dense())?;
    let rinv = upper_triangular_inverse(&r);

    // X = A R^{-1}, one sparse row combination per row.
    let mut x = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let dst = x.row_mut(i);
        for (&k, &aik) in cols.iter().zip(vals) {
            // R^{-1} is upper triangular: row k is zero left of column k.
            for (d, &s) in dst[k..].iter_mut().zip(&rinv.row(k)[k..]) {
                *d += aik * s;
            }
        }
    }
    // C = R^{-T} X; row i of C is sum_{k <= i} rinv[k][i] * X[k].
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let dst = c.row_mut(i);
        for k in 0..=i {
            let w = rinv[(k, i)];
            if w == T::zero() {
                continue;
            }
            for (d, &s) in dst.iter_mut().zip(x.row(k)) {
                *d += w * s;
            }
        }
    }
    drop(x);
    let half = T::lit(0.5);
    for i in 0..n {
        for j in 0..i {
            let s = (c[(i, j)] + c[(j, i)]) * half;
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }

    let eig = symmetric_eigen(&c, want_vectors)?;
    drop(c);
    let (eigenvectors, residuals) = match eig.vectors {
        Some(y) => {
            let mut v = rinv.matmul(&y)?;
            l_orthonormalize_columns(l, &mut v);
            let res = (0..n)
                .map(|j| pair_residual(a, l, eig.values[j], &v.column(j)))
                .collect::<Result<Vec<_>>>()?;
            (Some(v), res)
        }
        None => (None, Vec::new()),
    };
    Ok(EigenResult {
        eigenvalues: eig.values,
        eigenvectors,
        residuals,
        method: EigenMethod::DenseCholeskyQl,
        seed: None,
        converged: true,
        iterations: 0,
        timings: Timings { seconds: start.elapsed().as_secs_f64() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_laplacian, assemble_stiffness, QuadratureKind, QuadratureRule};
    use crate::coefficients::FieldPreset;
    use crate::mesh::{BoxDomain, StructuredGrid};

    fn pencil(n: usize, preset: FieldPreset) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
        let g = StructuredGrid::unit(3, n).unwrap();
        let q = QuadratureRule::new(QuadratureKind::Gauss2, 3);
        let f = preset.build(BoxDomain::unit(3).unwrap()).unwrap();
        (assemble_stiffness(&g, &f, &q).unwrap(), assemble_laplacian(&g, &q))
    }

    #[test]
    fn identity_pencil() {
        let (_, l) = pencil(4, FieldPreset::ConstantIsotropic);
        let r = dense_generalized_eig(&l, &l, false, &DenseOptions::default()).unwrap();
        assert_eq!(r.len(), 27);
        assert!(r.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn diagonal_pencil() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (1, 1, 3.0)]).unwrap();
        let r = dense_generalized_eig(&a, &CsrMatrix::identity(2), true, &DenseOptions::default())
            .unwrap();
        assert_eq!(r.eigenvalues, vec![2.0, 3.0]);
        assert!(r.residuals.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vectors_are_l_orthonormal_with_small_residuals() {
        let (a, l) = pencil(5, FieldPreset::SmoothRadial);
        let r = dense_generalized_eig(&a, &l, true, &DenseOptions::default()).unwrap();
        let v = r.eigenvectors.as_ref().unwrap();
        let n = a.order();
        let lv: Vec<Vec<f64>> = (0..n).map(|j| l.spmv(&v.column(j)).unwrap()).collect();
        for i in 0..n {
            let vi = v.column(i);
            for (j, lvj) in lv.iter().enumerate() {
                let g: f64 = vi.iter().zip(lvj).map(|(x, y)| x * y).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() <= 1e-8);
            }
        }
        assert!(r.residuals.iter().all(|&x| x < 1e-10));
        assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn shift_covariance() {
        let (a, l) = pencil(4, FieldPreset::AxisAffine);
        let sigma = 0.75;
        let shifted = CsrMatrix::linear_combination(1.0, &a, sigma, &l).unwrap();
        let r0 = dense_generalized_eig(&a, &l, false, &DenseOptions::default()).unwrap();
        let r1 = dense_generalized_eig(&shifted, &l, false, &DenseOptions::default()).unwrap();
        for (x, y) in r0.eigenvalues.iter().zip(&r1.eigenvalues) {
            assert!((x + sigma - y).abs() < 1e-10);
        }
    }

    #[test]
    fn scaling_preserves_eigenvectors() {
        let (a, l) = pencil(4, FieldPreset::PiecewiseInclusion);
        let alpha = 3.5;
        let r0 = dense_generalized_eig(&a, &l, true, &DenseOptions::default()).unwrap();
        let r1 = dense_generalized_eig(&a.scaled(alpha), &l, true, &DenseOptions::default()).unwrap();
        let v0 = r0.eigenvectors.unwrap();
        let v1 = r1.eigenvectors.unwrap();
        for j in 0..a.order() {
            assert!((alpha * r0.eigenvalues[j] - r1.eigenvalues[j]).abs() < 1e-10);
            // only compare vectors of simple eigenvalues
            let gap = |k: usize| {
                let lam = r0.eigenvalues[k];
                r0.eigenvalues
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, &m)| (m - lam).abs())
                    .fold(f64::INFINITY, f64::min)
            };
            if gap(j) > 1e-6 {
                let c0 = v0.column(j);
                let c1 = v1.column(j);
                let sign = if c0.iter().zip(&c1).map(|(x, y)| x * y).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                for (x, y) in c0.iter().zip(&c1) {
                    assert!((x - sign * y).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn rejects_oversized_and_indefinite() {
        let (a, l) = pencil(4, FieldPreset::ConstantAnisotropic);
        let err = dense_generalized_eig(&a, &l, false, &DenseOptions { cap: 10 }).unwrap_err();
        assert!(matches!(err, Error::DenseCapExceeded { n: 27, cap: 10 }));
        let neg = l.scaled(-1.0);
        assert!(matches!(
            dense_generalized_eig(&a, &neg, false, &DenseOptions::default()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn single_precision_pencil() {
        let g = StructuredGrid::<f32>::unit(2, 4).unwrap();
        let q = QuadratureRule::new(QuadratureKind::Gauss2, 2);
        let f = FieldPreset::ConstantAnisotropic.build(BoxDomain::unit(2).unwrap()).unwrap();
        let a = assemble_stiffness(&g, &f, &q).unwrap();
        let l = assemble_laplacian(&g, &q);
        let r = dense_generalized_eig(&a, &l, false, &DenseOptions::default()).unwrap();
        assert!(r.eigenvalues.iter().all(|&v| v > 1.0 - 1e-4 && v < 2.0 + 1e-4));
    }
}
