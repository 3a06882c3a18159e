//! Q1 finite element assembly of `<A u, v> = int grad v . K grad u` and
//! `<L u, v> = int grad v . grad u` over interior nodes.
//!
//! Boundary nodes are eliminated by never numbering them, which keeps both
//! matrices exactly symmetric. Each cell matrix is formed on its upper
//! triangle and mirrored, and cells are accumulated in lexicographic order.

use crate::coefficients::{DiagonalTensorField, HullEstimate};
use crate::error::Result;
use crate::linalg::CsrMatrix;
use crate::mesh::{StructuredGrid, MAX_DIM};
use crate::scalar::Real;

const MAX_LOCAL: usize = 1 << MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureKind {
    /// One point at the cell centroid.
    Centroid,
    /// `2^d` tensor Gauss-Legendre points; exact for Q1 stiffness with cellwise-constant `K`.
    #[default]
    Gauss2,
}

impl QuadratureKind {
    pub fn name(self) -> &'static str {
        match self {
            QuadratureKind::Centroid => "centroid",
            QuadratureKind::Gauss2 => "gauss2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "centroid" => Some(QuadratureKind::Centroid),
            "gauss2" => Some(QuadratureKind::Gauss2),
            _ => None,
        }
    }
}

/// Points and weights on the reference cell `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    kind: QuadratureKind,
    dim: usize,
    points: Vec<[T; MAX_DIM]>,
    weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn new(kind: QuadratureKind, dim: usize) -> Self {
        let half = T::lit(0.5);
        let nodes_1d: Vec<(T, T)> = match kind {
            QuadratureKind::Centroid => vec![(half, T::one())],
            QuadratureKind::Gauss2 => {
                let off = half / T::lit(3.0).sqrt();
                vec![(half - off, half), (half + off, half)]
            }
        };
        let m = nodes_1d.len();
        let count = m.pow(dim as u32);
        let mut points = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for q in 0..count {
            let mut p = [T::zero(); MAX_DIM];
            let mut w = T::one();
            let mut rest = q;
            for pk in p.iter_mut().take(dim) {
                let (x, wx) = nodes_1d[rest % m];
                *pk = x;
                w *= wx;
                rest /= m;
            }
            points.push(p);
            weights.push(w);
        }
        Self { kind, dim, points, weights }
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[[T; MAX_DIM]] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// Reference Q1 data: per quadrature point, the physical gradient of each local basis function.
struct ElementData<T> {
    d: usize,
    n_local: usize,
    /// `scaled[q][k][a*n_local + b] = vol * w_q * dphi_a/dx_k * dphi_b/dx_k`, upper triangle only.
    scaled: Vec<Vec<[T; MAX_LOCAL * MAX_LOCAL]>>,
    /// Quadrature point offsets inside a cell in physical units.
    offsets: Vec<[T; MAX_DIM]>,
}

impl<T: Real> ElementData<T> {
    fn new(grid: &StructuredGrid<T>, quad: &QuadratureRule<T>) -> Self {
        let d = grid.dim();
        assert_eq!(quad.dim(), d, "quadrature dimension must match grid");
        let h = grid.spacing();
        let n_local = 1 << d;
        let vol = h.iter().fold(T::one(), |a, &b| a * b);
        let mut scaled = Vec::with_capacity(quad.points().len());
        let mut offsets = Vec::with_capacity(quad.points().len());
        for (p, &w) in quad.points().iter().zip(quad.weights()) {
            // grad[a][k]
            let mut grad = [[T::zero(); MAX_DIM]; MAX_LOCAL];
            for (a, ga) in grad.iter_mut().enumerate().take(n_local) {
                for k in 0..d {
                    let mut g = if (a >> k) & 1 == 1 { T::one() } else { -T::one() };
                    for m in (0..d).filter(|&m| m != k) {
                        g *= if (a >> m) & 1 == 1 { p[m] } else { T::one() - p[m] };
                    }
                    ga[k] = g / h[k];
                }
            }
            let vw = vol * w;
            let per_axis = (0..d)
                .map(|k| {
                    let mut e = [T::zero(); MAX_LOCAL * MAX_LOCAL];
                    for a in 0..n_local {
                        for b in a..n_local {
                            e[a * n_local + b] = vw * grad[a][k] * grad[b][k];
                        }
                    }
                    e
                })
                .collect();
            scaled.push(per_axis);
            let mut off = [T::zero(); MAX_DIM];
            for k in 0..d {
                off[k] = p[k] * h[k];
            }
            offsets.push(off);
        }
        Self { d, n_local, scaled, offsets }
    }
}

/// Interior-DOF sparsity pattern of the Q1 stencil (`3^d` neighbours).
fn stencil_pattern<T: Real>(grid: &StructuredGrid<T>) -> (Vec<usize>, Vec<usize>) {
    let d = grid.dim();
    let n = grid.interior_dofs();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n * 3usize.pow(d as u32));
    row_ptr.push(0);
    let offsets = 3usize.pow(d as u32);
    for i in 0..n {
        let j = grid.lattice_index(i).expect("dof in range");
        // axis 0 varies fastest in both the offset walk and the DOF numbering,
        // so columns come out sorted.
        for o in 0..offsets {
            let mut nb = [0usize; MAX_DIM];
            let mut rest = o;
            for k in 0..d {
                nb[k] = (j[k] + rest % 3).wrapping_sub(1);
                rest /= 3;
            }
            if let Some(c) = grid.dof_of(&nb[..d]) {
                col_idx.push(c);
            }
        }
        row_ptr.push(col_idx.len());
    }
    (row_ptr, col_idx)
}

fn assemble_with<T: Real>(
    grid: &StructuredGrid<T>,
    quad: &QuadratureRule<T>,
    mut kappa: impl FnMut(&[T], &mut [T]),
) -> CsrMatrix<T> {
    let el = ElementData::new(grid, quad);
    let (d, nl) = (el.d, el.n_local);
    let (row_ptr, col_idx) = stencil_pattern(grid);
    let mut m = CsrMatrix::with_pattern(grid.interior_dofs(), row_ptr, col_idx);

    let mut x = [T::zero(); MAX_DIM];
    let mut k = [T::zero(); MAX_DIM];
    let mut local = [T::zero(); MAX_LOCAL * MAX_LOCAL];
    let mut dofs = [None; MAX_LOCAL];
    for c in 0..grid.cell_count() {
        let o = grid.cell_origin(c);
        let mut any = false;
        for (a, slot) in dofs.iter_mut().enumerate().take(nl) {
            let mut j = [0usize; MAX_DIM];
            for ax in 0..d {
                j[ax] = o[ax] + ((a >> ax) & 1);
            }
            *slot = grid.dof_of(&j[..d]);
            any |= slot.is_some();
        }
        if !any {
            continue;
        }
        local.iter_mut().for_each(|v| *v = T::zero());
        for (q, off) in el.offsets.iter().enumerate() {
            for ax in 0..d {
                x[ax] = grid.coordinate(ax, o[ax]) + off[ax];
            }
            kappa(&x[..d], &mut k[..d]);
            for ax in 0..d {
                let e = &el.scaled[q][ax];
                for a in 0..nl {
                    for b in a..nl {
                        local[a * nl + b] += k[ax] * e[a * nl + b];
                    }
                }
            }
        }
        for a in 0..nl {
            let Some(ia) = dofs[a] else { continue };
            m.add_at(ia, ia, local[a * nl + a]);
            for b in a + 1..nl {
                if let Some(ib) = dofs[b] {
                    let v = local[a * nl + b];
                    m.add_at(ia, ib, v);
                    m.add_at(ib, ia, v);
                }
            }
        }
    }
    m
}

/// Stiffness matrix of `-div K grad` on the interior DOFs of `grid`.
pub fn assemble_stiffness<T: Real>(
    grid: &StructuredGrid<T>,
    field: &DiagonalTensorField<T>,
    quad: &QuadratureRule<T>,
) -> Result<CsrMatrix<T>> {
    if field.dim() != grid.dim() {
        return Err(crate::error::Error::DimensionMismatch {
            expected: grid.dim(),
            got: field.dim(),
        });
    }
    // Quadrature points are strictly inside the grid's cells; the field only needs
    // to cover the grid's box.
    let probe = grid.domain().center();
    field.eval(&probe)?;
    if !field.domain().contains_box(grid.domain()) {
        return Err(crate::error::Error::PointOutsideDomain {
            point: grid.domain().hi().iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(assemble_with(grid, quad, |x, out| field.eval_into(x, out)))
}

/// Stiffness matrix of `-Laplace`, i.e. [`assemble_stiffness`] with `K = I`.
pub fn assemble_laplacian<T: Real>(grid: &StructuredGrid<T>, quad: &QuadratureRule<T>) -> CsrMatrix<T> {
    assemble_with(grid, quad, |_, out| out.iter_mut().for_each(|v| *v = T::one()))
}

/// Range of every coefficient component over the quadrature points of `grid`.
///
/// This is the interval for which `lo * x^T L x <= x^T A x <= hi * x^T L x` holds
/// exactly when `A` and `L` are assembled with the same rule.
pub fn quadrature_hull<T: Real>(
    field: &DiagonalTensorField<T>,
    grid: &StructuredGrid<T>,
    quad: &QuadratureRule<T>,
) -> HullEstimate {
    let d = grid.dim();
    let mut hull = HullEstimate::empty();
    let mut x = [T::zero(); MAX_DIM];
    let mut k = [T::zero(); MAX_DIM];
    for c in 0..grid.cell_count() {
        let o = grid.cell_origin(c);
        for p in quad.points() {
            for ax in 0..d {
                x[ax] = grid.coordinate(ax, o[ax]) + p[ax] * grid.spacing()[ax];
            }
            field.eval_into(&x[..d], &mut k[..d]);
            for v in &k[..d] {
                hull.include(v.as_f64());
            }
            hull.samples_used += 1;
        }
    }
    hull
}

/// Values of `f` at the interior nodes, in DOF order.
pub fn interpolate<T: Real>(grid: &StructuredGrid<T>, mut f: impl FnMut(&[T]) -> T) -> Vec<T> {
    let mut out = vec![T::zero(); grid.interior_dofs()];
    grid.for_each_interior_node(|dof, x| out[dof] = f(x));
    out
}

/// As [`interpolate`], stopping at the first evaluation error.
pub fn try_interpolate<T: Real, E>(
    grid: &StructuredGrid<T>,
    mut f: impl FnMut(&[T]) -> std::result::Result<T, E>,
) -> std::result::Result<Vec<T>, E> {
    let mut out = vec![T::zero(); grid.interior_dofs()];
    let mut err = None;
    grid.for_each_interior_node(|dof, x| {
        if err.is_none() {
            match f(x) {
                Ok(v) => out[dof] = v,
                Err(e) => err = Some(e),
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
