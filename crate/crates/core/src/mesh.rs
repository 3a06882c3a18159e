//! Uniform tensor-product grids on axis-aligned boxes.
//!
//! Only interior nodes carry degrees of freedom: the homogeneous Dirichlet
//! condition is imposed by never numbering boundary nodes. Interior DOFs are
//! numbered lexicographically with axis 0 fastest.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidDomain(format!(
                "lo has {} coordinates, hi has {}",
                lo.len(),
                hi.len()
            )));
        }
        let d = lo.len();
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        for k in 0..d {
            if !(lo[k].is_finite() && hi[k].is_finite()) || lo[k] >= hi[k] {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need finite lo < hi, got [{}, {}]",
                    lo[k], hi[k]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The unit box `[0, 1]^d`.
    pub fn unit(d: usize) -> Result<Self> {
        Self::new(vec![T::zero(); d], vec![T::one(); d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).map(|k| self.extent(k)).fold(T::one(), |a, b| a * b)
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&xi, (&l, &h))| xi >= l && xi <= h)
    }

    /// Open-box membership.
    pub fn contains_strictly(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&xi, (&l, &h))| xi > l && xi < h)
    }

    /// True when `other` is a subset of `self` (closed boxes).
    pub fn contains_box(&self, other: &BoxDomain<T>) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|k| other.lo[k] >= self.lo[k] && other.hi[k] <= self.hi[k])
    }

    /// True when the open boxes intersect.
    pub fn overlaps(&self, other: &BoxDomain<T>) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|k| other.lo[k] < self.hi[k] && other.hi[k] > self.lo[k])
    }

    pub fn center(&self) -> Vec<T> {
        let half = T::lit(0.5);
        (0..self.dim()).map(|k| (self.lo[k] + self.hi[k]) * half).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid<T> {
    domain: BoxDomain<T>,
    cells: Vec<usize>,
    spacing: Vec<T>,
    /// Interior nodes per axis, `cells[k] - 1`.
    interior: Vec<usize>,
}

/// Builds a grid with `cells[k]` uniform cells along axis `k`.
pub fn build_grid<T: Real>(domain: BoxDomain<T>, cells: &[usize]) -> Result<StructuredGrid<T>> {
    StructuredGrid::new(domain, cells)
}

impl<T: Real> StructuredGrid<T> {
    pub fn new(domain: BoxDomain<T>, cells: &[usize]) -> Result<Self> {
        let d = domain.dim();
        if cells.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cells.len() });
        }
        if let Some((axis, &n)) = cells.iter().enumerate().find(|(_, &n)| n < 2) {
            return Err(Error::TooFewCells { axis, cells: n });
        }
        let spacing = (0..d)
            .map(|k| domain.extent(k) / T::from_usize_lossy(cells[k]))
            .collect();
        Ok(Self {
            domain,
            cells: cells.to_vec(),
            spacing,
            interior: cells.iter().map(|n| n - 1).collect(),
        })
    }

    /// Unit cube (or square, interval) with `n` cells along every axis.
    pub fn unit(d: usize, n: usize) -> Result<Self> {
        Self::new(BoxDomain::unit(d)?, &vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn domain(&self) -> &BoxDomain<T> {
        &self.domain
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> T {
        self.spacing.iter().copied().fold(T::zero(), T::max)
    }

    pub fn total_nodes(&self) -> usize {
        self.cells.iter().map(|n| n + 1).product()
    }

    pub fn interior_dofs(&self) -> usize {
        self.interior.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Coordinate of lattice line `j` along `axis`: `lo + j * h`.
    #[inline]
    pub fn coordinate(&self, axis: usize, j: usize) -> T {
        self.domain.lo[axis] + T::from_usize_lossy(j) * self.spacing[axis]
    }

    /// Lattice indices (`1..n_k` on each axis) of an interior DOF.
    pub fn lattice_index(&self, dof: usize) -> Result<[usize; MAX_DIM]> {
        let len = self.interior_dofs();
        if dof >= len {
            return Err(Error::IndexOutOfRange { index: dof, len });
        }
        let mut idx = [0; MAX_DIM];
        let mut rest = dof;
        for (k, &m) in self.interior.iter().enumerate() {
            idx[k] = rest % m + 1;
            rest /= m;
        }
        Ok(idx)
    }

    /// DOF number of the node with lattice indices `j`, or `None` on the boundary.
    #[inline]
    pub fn dof_of(&self, j: &[usize]) -> Option<usize> {
        let mut dof = 0;
        let mut stride = 1;
        for (k, &m) in self.interior.iter().enumerate() {
            let jk = j[k];
            if jk == 0 || jk > m {
                return None;
            }
            dof += (jk - 1) * stride;
            stride *= m;
        }
        Some(dof)
    }

    pub fn node_coords(&self, dof: usize) -> Result<Vec<T>> {
        let j = self.lattice_index(dof)?;
        Ok((0..self.dim()).map(|k| self.coordinate(k, j[k])).collect())
    }

    /// Visits every interior node in DOF order with its coordinates.
    pub fn for_each_interior_node(&self, mut f: impl FnMut(usize, &[T])) {
        let d = self.dim();
        let mut x = vec![T::zero(); d];
        let mut j = [1usize; MAX_DIM];
        for k in 0..d {
            x[k] = self.coordinate(k, 1);
        }
        for dof in 0..self.interior_dofs() {
            f(dof, &x);
            for k in 0..d {
                j[k] += 1;
                if j[k] < self.cells[k] {
                    x[k] = self.coordinate(k, j[k]);
                    break;
                }
                j[k] = 1;
                x[k] = self.coordinate(k, 1);
            }
        }
    }

    /// Visits every node of the closed lattice, boundary included.
    pub fn for_each_node(&self, mut f: impl FnMut(&[T])) {
        let d = self.dim();
        let mut j = [0usize; MAX_DIM];
        let mut x: Vec<T> = (0..d).map(|k| self.coordinate(k, 0)).collect();
        for _ in 0..self.total_nodes() {
            f(&x);
            for k in 0..d {
                j[k] += 1;
                if j[k] <= self.cells[k] {
                    x[k] = self.coordinate(k, j[k]);
                    break;
                }
                j[k] = 0;
                x[k] = self.coordinate(k, 0);
            }
        }
    }

    /// The same domain with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let cells: Vec<usize> = self.cells.iter().map(|n| n * factor).collect();
        Self::new(self.domain.clone(), &cells)
    }

    /// Lower corner lattice index of cell number `c` (lexicographic, axis 0 fastest).
    #[inline]
    pub(crate) fn cell_origin(&self, c: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rest = c;
        for (k, &n) in self.cells.iter().enumerate() {
            idx[k] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            lo: self.domain.lo.iter().map(|v| v.as_f64()).collect(),
            hi: self.domain.hi.iter().map(|v| v.as_f64()).collect(),
            cells: self.cells.clone(),
            interior_dofs: self.interior_dofs(),
        }
    }
}

/// Plain description of a grid for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDescriptor {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub interior_dofs: usize,
}
