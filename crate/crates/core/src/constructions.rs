//! Probe functions for the pencil: the disc-neighbourhood family `v_r` and
//! tensor-product box modes.
//!
//! `v_r` is built around a disc `D_r` of radius `r` centred at `x0` and
//! orthogonal to a distinguished axis `a`. With `d(x, D_r)` the Euclidean
//! distance to the disc,
//!
//! ```text
//! v_r(x) = 1 - d(x, D_r) / r^2   if d(x, D_r) <= r^2
//!        = 0                     otherwise
//! ```
//!
//! `R_r = {d(x, D_r) <= r^2}` is the support and `C_r = {|x_a - x0_a| < r^2,
//! planar distance <= r}` the cylinder over the disc. Axes are 0-based.
//!
//! Everything here works in `f64`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::interpolate;
use crate::coefficients::DiagonalTensorField;
use crate::eig::rayleigh_quotient;
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, l_norm, CgOptions, CsrMatrix, DEFAULT_INNER_TOL};
use crate::mesh::{BoxDomain, StructuredGrid};

/// Default multiple of the largest grid spacing that the collar `r^2` must reach.
pub const DEFAULT_RESOLVABILITY_FACTOR: f64 = 1.0;

/// Default minimum number of grid cells along each edge of a box-mode support.
pub const DEFAULT_MIN_EDGE_CELLS: f64 = 2.0;

/// The two axes other than `axis`, ascending.
fn planar_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Axial offset and planar distance of `x` relative to the disc centre.
fn disc_coordinates(x: &[f64; 3], x0: &[f64; 3], axis: usize) -> (f64, f64) {
    let [p, q] = planar_axes(axis);
    let a = (x[axis] - x0[axis]).abs();
    let rho = (x[p] - x0[p]).hypot(x[q] - x0[q]);
    (a, rho)
}

/// Euclidean distance from `x` to the closed disc of radius `r` centred at
/// `x0` and normal to `axis`.
pub fn distance_to_disc(x: &[f64; 3], x0: &[f64; 3], r: f64, axis: usize) -> f64 {
    let (a, rho) = disc_coordinates(x, x0, axis);
    if rho <= r {
        a
    } else {
        a.hypot(rho - r)
    }
}

/// Pointwise value of `v_r`, clamped to `[0, 1]`.
pub fn analytic_vr(x: &[f64; 3], x0: &[f64; 3], r: f64, axis: usize) -> f64 {
    let r2 = r * r;
    let d = distance_to_disc(x, x0, r, axis);
    if d > r2 {
        0.0
    } else {
        (1.0 - d / r2).clamp(0.0, 1.0)
    }
}

/// Gradient of `v_r` where it is differentiable; zero outside `R_r`.
pub fn analytic_vr_gradient(x: &[f64; 3], x0: &[f64; 3], r: f64, axis: usize) -> [f64; 3] {
    let r2 = r * r;
    let [p, q] = planar_axes(axis);
    let t = x[axis] - x0[axis];
    let (u, w) = (x[p] - x0[p], x[q] - x0[q]);
    let rho = u.hypot(w);
    let mut g = [0.0; 3];
    if rho <= r {
        if t.abs() < r2 && t != 0.0 {
            g[axis] = -t.signum() / r2;
        }
        return g;
    }
    let dr = rho - r;
    let d = t.hypot(dr);
    if d > r2 || d == 0.0 {
        return g;
    }
    // grad d = (x - x_D) / d with x_D the nearest point on the disc rim.
    g[axis] = -t / (d * r2);
    g[p] = -(dr * u / rho) / (d * r2);
    g[q] = -(dr * w / rho) / (d * r2);
    g
}

/// Half-widths of the axis-aligned bounding box of `R_r`, indexed by axis.
pub fn support_half_widths(r: f64, axis: usize) -> [f64; 3] {
    let mut h = [r + r * r; 3];
    h[axis] = r * r;
    h
}

fn as_point(x: &[f64], what: &str) -> Result<[f64; 3]> {
    x.try_into()
        .map_err(|_| Error::InvalidArgument(format!("{what} must have 3 coordinates, got {}", x.len())))
}

fn check_vr_args(grid: &StructuredGrid<f64>, x0: &[f64; 3], axis: usize, r: f64, factor: f64) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::Probe(format!("v_r probes need a 3D grid, got dimension {}", grid.dim())));
    }
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range 0..3")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("radius {r} not in (0, 1)")));
    }
    let hw = support_half_widths(r, axis);
    let lo: Vec<f64> = (0..3).map(|k| x0[k] - hw[k]).collect();
    let hi: Vec<f64> = (0..3).map(|k| x0[k] + hw[k]).collect();
    let dom = grid.domain();
    if !dom.contains_strictly(&lo) || !dom.contains_strictly(&hi) {
        return Err(Error::Probe(format!(
            "support R_r with r = {r} around {x0:?} is not strictly inside the domain"
        )));
    }
    let spacing = grid.max_spacing();
    if r * r < factor * spacing {
        return Err(Error::Resolvability { collar: r * r, factor, spacing });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrProbe {
    pub x0: [f64; 3],
    pub axis: usize,
    pub r: f64,
    #[serde(skip)]
    pub nodal: Vec<f64>,
}

/// Nodal interpolant of `v_r` on the interior nodes of `grid`.
///
/// Fails if `R_r` is not strictly inside the domain or if `r^2` is smaller
/// than `resolvability_factor` times the largest grid spacing.
pub fn build_vr(
    grid: &StructuredGrid<f64>,
    x0: &[f64],
    axis: usize,
    r: f64,
    resolvability_factor: f64,
) -> Result<VrProbe> {
    let x0 = as_point(x0, "x0")?;
    check_vr_args(grid, &x0, axis, r, resolvability_factor)?;
    let nodal = interpolate(grid, |x| analytic_vr(&[x[0], x[1], x[2]], &x0, r, axis));
    Ok(VrProbe { x0, axis, r, nodal })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualMetrics {
    /// `||v||_L`.
    pub l_norm: f64,
    /// `||u||_L` with `L u = (lambda L - A) v`.
    pub residual_l_norm: f64,
    pub cg_iterations: usize,
}

/// Energy norm of `v` and of the preconditioned residual `L^{-1}(lambda L - A) v`.
pub fn residual_metrics(a: &CsrMatrix<f64>, l: &CsrMatrix<f64>, lambda: f64, v: &[f64]) -> Result<ResidualMetrics> {
    let av = a.spmv(v)?;
    let lv = l.spmv(v)?;
    let rhs: Vec<f64> = lv.iter().zip(&av).map(|(p, q)| lambda * p - q).collect();
    let out = cg_solve(l, &rhs, &CgOptions::with_tol(DEFAULT_INNER_TOL))?;
    Ok(ResidualMetrics {
        l_norm: l_norm(l, v)?,
        residual_l_norm: l_norm(l, &out.x)?,
        cg_iterations: out.iterations,
    })
}

/// [`residual_metrics`] for a `v_r` probe.
pub fn vr_metrics(a: &CsrMatrix<f64>, l: &CsrMatrix<f64>, lambda: f64, probe: &VrProbe) -> Result<ResidualMetrics> {
    residual_metrics(a, l, lambda, &probe.nodal)
}

/// Sampled suprema entering the continuum residual bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VrBoundTerms {
    /// `sup_{R_r} |k_a(x0) - k_a(x)|`.
    pub sup_same: f64,
    /// `sum_{i != a} sup_{R_r} |k_a(x0) - k_i(x)|^2`.
    pub cross_sq_sum: f64,
    pub samples: usize,
    pub bound: f64,
}

/// Samples `field` on a symmetric `sampling^3` lattice over the bounding box of
/// `R_r`, keeping points inside `R_r`, and evaluates
/// `(2 pi + 2 pi r (2 + r)) sup_same^2 + 2 pi r (2 + r) cross_sq_sum`.
pub fn vr_bound_terms(
    field: &DiagonalTensorField<f64>,
    x0: &[f64],
    axis: usize,
    r: f64,
    sampling: usize,
) -> Result<VrBoundTerms> {
    let x0 = as_point(x0, "x0")?;
    if field.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: field.dim() });
    }
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range 0..3")));
    }
    let n = sampling.max(2);
    let hw = support_half_widths(r, axis);
    let r2 = r * r;
    let k0 = field.eval(&x0)?[axis];
    let mut sup_same = 0.0f64;
    let mut sup_cross = [0.0f64; 3];
    let mut samples = 0;
    let mut k = [0.0; 3];
    let coord = |c: usize, j: usize| x0[c] + hw[c] * (-1.0 + 2.0 * j as f64 / (n - 1) as f64);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let x = [coord(0, i), coord(1, j), coord(2, l)];
                if distance_to_disc(&x, &x0, r, axis) > r2 * (1.0 + 1e-12) {
                    continue;
                }
                if !field.domain().contains(&x) {
                    continue;
                }
                field.eval_into(&x, &mut k);
                samples += 1;
                sup_same = sup_same.max((k0 - k[axis]).abs());
                for c in (0..3).filter(|&c| c != axis) {
                    sup_cross[c] = sup_cross[c].max((k0 - k[c]).abs());
                }
            }
        }
    }
    let cross_sq_sum: f64 = sup_cross.iter().map(|s| s * s).sum();
    let collar = 2.0 * PI * r * (2.0 + r);
    Ok(VrBoundTerms {
        sup_same,
        cross_sq_sum,
        samples,
        bound: (2.0 * PI + collar) * sup_same * sup_same + collar * cross_sq_sum,
    })
}

/// Continuum upper bound for the squared residual norm of `v_r`.
pub fn vr_theoretical_bound(
    field: &DiagonalTensorField<f64>,
    x0: &[f64],
    axis: usize,
    r: f64,
    sampling: usize,
) -> Result<f64> {
    Ok(vr_bound_terms(field, x0, axis, r, sampling)?.bound)
}

/// `int (d v_r / d x_i)^2` split into the cylinder `C_r` and the rest of `R_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientEnergy {
    pub cylinder: [f64; 3],
    pub collar: [f64; 3],
}

impl GradientEnergy {
    pub fn total(&self) -> f64 {
        self.cylinder.iter().chain(&self.collar).sum()
    }
}

/// Midpoint-rule quadrature of the analytic gradient of `v_r` over the
/// bounding box of `R_r`, with `n_axial x n_planar^2` points.
pub fn gradient_energy(r: f64, axis: usize, n_axial: usize, n_planar: usize) -> GradientEnergy {
    let x0 = [0.0; 3];
    let hw = support_half_widths(r, axis);
    let counts = {
        let mut c = [n_planar; 3];
        c[axis] = n_axial;
        c
    };
    let step: Vec<f64> = (0..3).map(|k| 2.0 * hw[k] / counts[k] as f64).collect();
    let dv = step.iter().product::<f64>();
    let r2 = r * r;
    let mut e = GradientEnergy { cylinder: [0.0; 3], collar: [0.0; 3] };
    for i in 0..counts[0] {
        let x0c = -hw[0] + (i as f64 + 0.5) * step[0];
        for j in 0..counts[1] {
            let x1c = -hw[1] + (j as f64 + 0.5) * step[1];
            for k in 0..counts[2] {
                let x = [x0c, x1c, -hw[2] + (k as f64 + 0.5) * step[2]];
                let g = analytic_vr_gradient(&x, &x0, r, axis);
                let (a, rho) = disc_coordinates(&x, &x0, axis);
                let bucket = if a < r2 && rho <= r { &mut e.cylinder } else { &mut e.collar };
                for c in 0..3 {
                    bucket[c] += g[c] * g[c] * dv;
                }
            }
        }
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub cylinder: f64,
    pub cylinder_stderr: f64,
    pub collar: f64,
    pub collar_stderr: f64,
    pub samples: usize,
}

/// Monte Carlo volumes of `C_r` and `R_r \ C_r` from uniform samples in the
/// bounding box of `R_r`.
pub fn monte_carlo_volumes(r: f64, samples: usize, seed: u64) -> VolumeEstimate {
    let axis = 0;
    let x0 = [0.0; 3];
    let hw = support_half_widths(r, axis);
    let box_volume = 8.0 * hw[0] * hw[1] * hw[2];
    let r2 = r * r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut in_cyl, mut in_collar) = (0usize, 0usize);
    for _ in 0..samples {
        let x = [
            rng.gen_range(-hw[0]..hw[0]),
            rng.gen_range(-hw[1]..hw[1]),
            rng.gen_range(-hw[2]..hw[2]),
        ];
        let (a, rho) = disc_coordinates(&x, &x0, axis);
        if a < r2 && rho <= r {
            in_cyl += 1;
        } else if distance_to_disc(&x, &x0, r, axis) <= r2 {
            in_collar += 1;
        }
    }
    let est = |hits: usize| {
        let p = hits as f64 / samples as f64;
        (box_volume * p, box_volume * (p * (1.0 - p) / samples as f64).sqrt())
    };
    let (cylinder, cylinder_stderr) = est(in_cyl);
    let (collar, collar_stderr) = est(in_collar);
    VolumeEstimate { cylinder, cylinder_stderr, collar, collar_stderr, samples }
}

/// Largest central finite difference of `v_r` along any axis, over uniform
/// samples in the bounding box of `R_r`.
pub fn max_fd_gradient(r: f64, axis: usize, samples: usize, seed: u64, step: f64) -> f64 {
    let x0 = [0.0; 3];
    let hw = support_half_widths(r, axis);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = [
            rng.gen_range(-hw[0]..hw[0]),
            rng.gen_range(-hw[1]..hw[1]),
            rng.gen_range(-hw[2]..hw[2]),
        ];
        for c in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[c] += step;
            xm[c] -= step;
            let fd = (analytic_vr(&xp, &x0, r, axis) - analytic_vr(&xm, &x0, r, axis)) / (2.0 * step);
            worst = worst.max(fd.abs());
        }
    }
    worst
}

/// Parameters of a box mode: the support
/// `S_h = x0 + (0, h sqrt(lambda - k1)) x (0, h sqrt(k2 - lambda)) x (0, h)`
/// and the mode number `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxModeSpec {
    pub x0: [f64; 3],
    pub k1: f64,
    pub k2: f64,
    pub lambda: f64,
    pub h: f64,
    pub n: u32,
}

impl BoxModeSpec {
    pub fn edges(&self) -> [f64; 3] {
        [self.h * (self.lambda - self.k1).sqrt(), self.h * (self.k2 - self.lambda).sqrt(), self.h]
    }

    pub fn support(&self) -> Result<BoxDomain<f64>> {
        let e = self.edges();
        BoxDomain::new(self.x0.to_vec(), (0..3).map(|k| self.x0[k] + e[k]).collect())
    }

    /// `sin(n pi (x1 - x0_1) / e1) sin(n pi (x2 - x0_2) / e2)` inside the open support, else 0.
    pub fn value(&self, x: &[f64]) -> f64 {
        let e = self.edges();
        let inside = (0..3).all(|k| x[k] > self.x0[k] && x[k] < self.x0[k] + e[k]);
        if !inside {
            return 0.0;
        }
        let n = f64::from(self.n) * PI;
        (n * (x[0] - self.x0[0]) / e[0]).sin() * (n * (x[1] - self.x0[1]) / e[1]).sin()
    }

    /// Checks `k1 < lambda < k2`, `0 < h < 1` and `n >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 < self.lambda && self.lambda < self.k2) {
            return Err(Error::InvalidArgument(format!(
                "lambda = {} must lie strictly between k1 = {} and k2 = {}",
                self.lambda, self.k1, self.k2
            )));
        }
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::InvalidArgument(format!("scale h = {} not in (0, 1)", self.h)));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("mode number n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxModeProbe {
    pub spec: BoxModeSpec,
    #[serde(skip)]
    pub nodal: Vec<f64>,
}

/// Nodal interpolant of the box mode on the interior nodes of `grid`.
///
/// `constancy` is the region on which the coefficient is constant; the support
/// must lie inside it, and every edge must span at least `min_edge_cells` cells.
pub fn build_box_mode(
    grid: &StructuredGrid<f64>,
    spec: &BoxModeSpec,
    constancy: &BoxDomain<f64>,
    min_edge_cells: f64,
) -> Result<BoxModeProbe> {
    if grid.dim() != 3 {
        return Err(Error::Probe(format!("box modes need a 3D grid, got dimension {}", grid.dim())));
    }
    spec.validate()?;
    let support = spec.support()?;
    if !constancy.contains_box(&support) {
        return Err(Error::Probe(format!(
            "support {:?}..{:?} is not inside the constancy region {:?}..{:?}",
            support.lo(),
            support.hi(),
            constancy.lo(),
            constancy.hi()
        )));
    }
    if !grid.domain().contains_box(constancy) {
        return Err(Error::Probe("constancy region is not inside the domain".into()));
    }
    for (k, e) in spec.edges().iter().enumerate() {
        let cells = e / grid.spacing()[k];
        if cells < min_edge_cells {
            return Err(Error::Probe(format!(
                "support edge along axis {k} spans {cells:.3} cells, fewer than {min_edge_cells}"
            )));
        }
    }
    let nodal = interpolate(grid, |x| spec.value(x));
    Ok(BoxModeProbe { spec: *spec, nodal })
}

/// Checks that `field` equals `k1`, `k2` in components 0 and 1 on a lattice
/// over the probe's support.
pub fn verify_box_constants(field: &DiagonalTensorField<f64>, spec: &BoxModeSpec) -> Result<()> {
    let support = spec.support()?;
    let mut k = [0.0; 3];
    for i in 0..5 {
        for j in 0..5 {
            for l in 0..5 {
                let x: Vec<f64> = [i, j, l]
                    .iter()
                    .enumerate()
                    .map(|(a, &m)| support.lo()[a] + support.extent(a) * m as f64 / 4.0)
                    .collect();
                field.eval_into(&x, &mut k);
                if (k[0] - spec.k1).abs() > 1e-12 || (k[1] - spec.k2).abs() > 1e-12 {
                    return Err(Error::Probe(format!(
                        "field is ({}, {}) at {x:?}, expected k1 = {}, k2 = {} on the support",
                        k[0], k[1], spec.k1, spec.k2
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxModeMetrics {
    pub rayleigh: f64,
    pub l_norm: f64,
    pub residual_l_norm: f64,
    pub cg_iterations: usize,
}

pub fn box_mode_metrics(
    a: &CsrMatrix<f64>,
    l: &CsrMatrix<f64>,
    lambda: f64,
    probe: &BoxModeProbe,
) -> Result<BoxModeMetrics> {
    let rayleigh = rayleigh_quotient(a, l, &probe.nodal)?;
    let m = residual_metrics(a, l, lambda, &probe.nodal)?;
    Ok(BoxModeMetrics { rayleigh, l_norm: m.l_norm, residual_l_norm: m.residual_l_norm, cg_iterations: m.cg_iterations })
}

/// Writes `x,y,z,value` rows for interior nodes, skipping zeros when `nonzero_only`.
pub fn write_probe_csv<W: Write>(
    grid: &StructuredGrid<f64>,
    nodal: &[f64],
    nonzero_only: bool,
    mut w: W,
) -> Result<()> {
    if nodal.len() != grid.interior_dofs() {
        return Err(Error::DimensionMismatch { expected: grid.interior_dofs(), got: nodal.len() });
    }
    writeln!(w, "x,y,z,value")?;
    let mut status = Ok(());
    grid.for_each_interior_node(|dof, x| {
        let v = nodal[dof];
        if status.is_err() || (nonzero_only && v == 0.0) {
            return;
        }
        let c = |k: usize| x.get(k).copied().unwrap_or(0.0);
        status = writeln!(w, "{},{},{},{}", c(0), c(1), c(2), v);
    });
    status?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_laplacian, assemble_stiffness, QuadratureKind, QuadratureRule};
    use crate::coefficients::{AffineComponent, FieldKind};

    const C: [f64; 3] = [0.5, 0.5, 0.5];

    fn unit_field(kind: FieldKind<f64>) -> DiagonalTensorField<f64> {
        DiagonalTensorField::new(BoxDomain::unit(3).unwrap(), kind).unwrap()
    }

    #[test]
    fn distance_examples() {
        let r = 0.2;
        assert_eq!(distance_to_disc(&[0.5, 0.6, 0.45], &C, r, 0), 0.0);
        assert!((distance_to_disc(&[0.53, 0.5, 0.5], &C, r, 0) - 0.03).abs() < 1e-15);
        assert!((distance_to_disc(&[0.5, 0.5 + r + 0.01, 0.5], &C, r, 0) - 0.01).abs() < 1e-14);
        // permuted axis: the disc lies in the x1 = const plane
        assert!((distance_to_disc(&[0.5, 0.53, 0.5], &C, r, 1) - 0.03).abs() < 1e-15);
        assert!((distance_to_disc(&[0.53, 0.5, 0.5], &C, r, 1)).abs() < 1e-15);
        // rim corner: sqrt(a^2 + b^2)
        let x = [0.5 + 0.03, 0.5 + r + 0.04, 0.5];
        assert!((distance_to_disc(&x, &C, r, 0) - 0.05).abs() < 1e-14);
    }

    #[test]
    fn vr_profile() {
        let r = 0.25;
        let r2 = r * r;
        assert_eq!(analytic_vr(&C, &C, r, 2), 1.0);
        assert!((analytic_vr(&[0.5, 0.5, 0.5 + r2 / 2.0], &C, r, 2) - 0.5).abs() < 1e-14);
        assert_eq!(analytic_vr(&[0.5, 0.5, 0.5 + 1.01 * r2], &C, r, 2), 0.0);
    }

    #[test]
    fn build_vr_examples_and_errors() {
        let g = StructuredGrid::unit(3, 16).unwrap();
        let p = build_vr(&g, &C, 0, 0.3, 1.0).unwrap();
        let centre = g.dof_of(&[8, 8, 8]).unwrap();
        assert_eq!(p.nodal[centre], 1.0);
        assert!(p.nodal.iter().all(|v| (0.0..=1.0).contains(v)));
        let off = g.dof_of(&[9, 8, 8]).unwrap();
        assert!((p.nodal[off] - (1.0 - 0.0625 / 0.09)).abs() < 1e-14);
        let far = g.dof_of(&[10, 8, 8]).unwrap();
        assert_eq!(p.nodal[far], 0.0);

        assert!(matches!(build_vr(&g, &C, 0, 0.2, 1.0), Err(Error::Resolvability { .. })));
        assert!(matches!(build_vr(&g, &[0.2, 0.5, 0.5], 1, 0.3, 1.0), Err(Error::Probe(_))));
        assert!(matches!(build_vr(&g, &[0.5, 0.5], 0, 0.3, 1.0), Err(Error::InvalidArgument(_))));
        let g2 = StructuredGrid::unit(2, 16).unwrap();
        assert!(matches!(build_vr(&g2, &C, 0, 0.3, 1.0), Err(Error::Probe(_))));
    }

    #[test]
    fn constant_field_has_zero_residual() {
        let g = StructuredGrid::unit(3, 16).unwrap();
        let q = QuadratureRule::new(QuadratureKind::Gauss2, 3);
        let f = DiagonalTensorField::constant(BoxDomain::unit(3).unwrap(), vec![1.7; 3]).unwrap();
        let a = assemble_stiffness(&g, &f, &q).unwrap();
        let l = assemble_laplacian(&g, &q);
        let p = build_vr(&g, &C, 0, 0.3, 1.0).unwrap();
        let m = vr_metrics(&a, &l, 1.7, &p).unwrap();
        assert!(m.residual_l_norm <= 1e-9 * m.l_norm);
        assert!(m.l_norm > 1.0);
    }

    #[test]
    fn bound_for_constant_field_vanishes() {
        let f = DiagonalTensorField::constant(BoxDomain::unit(3).unwrap(), vec![1.3; 3]).unwrap();
        assert_eq!(vr_theoretical_bound(&f, &C, 0, 0.2, 21).unwrap(), 0.0);
    }

    #[test]
    fn bound_for_affine_field_matches_geometry() {
        let f = unit_field(FieldKind::AxisAffine(vec![
            AffineComponent { offset: 1.0, slope: 1.0, coord: 0 },
            AffineComponent { offset: 1.0, slope: 0.0, coord: 0 },
            AffineComponent { offset: 1.0, slope: 0.0, coord: 0 },
        ]));
        let r: f64 = 0.2;
        let t = vr_bound_terms(&f, &C, 0, r, 41).unwrap();
        assert!((t.sup_same - r * r).abs() < 1e-12);
        assert!((t.cross_sq_sum - 2.0 * 0.25).abs() < 1e-12);
        let collar = 2.0 * PI * r * (2.0 + r);
        let expect = (2.0 * PI + collar) * r.powi(4) + collar * 0.5;
        assert!((t.bound - expect).abs() < 1e-12);
    }

    #[test]
    fn cylinder_integral_is_two_pi() {
        for r in [0.3, 0.14] {
            let e = gradient_energy(r, 0, 8, 400);
            assert!((e.cylinder[0] - 2.0 * PI).abs() < 0.01 * 2.0 * PI, "{:?}", e);
            assert_eq!(e.cylinder[1], 0.0);
            assert_eq!(e.cylinder[2], 0.0);
            let collar: f64 = e.collar.iter().sum();
            assert!(collar <= 2.0 * PI * r * (2.0 + r));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let r = 0.3;
        let x0 = [0.1, -0.2, 0.3];
        let pts = [[0.13, -0.2 + 0.32, 0.31], [0.1 + 0.05, -0.2, 0.3], [0.1 - 0.02, -0.2 + 0.1, 0.3 - 0.31]];
        for axis in 0..3 {
            for x in &pts {
                let g = analytic_vr_gradient(x, &x0, r, axis);
                for c in 0..3 {
                    let (mut p, mut m) = (*x, *x);
                    p[c] += 1e-7;
                    m[c] -= 1e-7;
                    let fd = (analytic_vr(&p, &x0, r, axis) - analytic_vr(&m, &x0, r, axis)) / 2e-7;
                    assert!((fd - g[c]).abs() < 1e-5 * (1.0 + g[c].abs()), "{axis} {x:?} {c}: {fd} {}", g[c]);
                }
            }
        }
    }

    #[test]
    fn volumes_and_gradient_bounds() {
        let r = 0.2;
        let v = monte_carlo_volumes(r, 200_000, 3);
        assert!((v.cylinder - 2.0 * PI * r.powi(4)).abs() < 5.0 * v.cylinder_stderr);
        let exact_collar = PI * PI * r.powi(5) + 4.0 / 3.0 * PI * r.powi(6);
        assert!((v.collar - exact_collar).abs() < 5.0 * v.collar_stderr);
        assert!(max_fd_gradient(r, 0, 20_000, 5, 1e-6) <= 1.0 / (r * r) * (1.0 + 1e-6));
    }

    fn box_spec() -> BoxModeSpec {
        BoxModeSpec { x0: [0.3, 0.3, 0.25], k1: 1.0, k2: 2.0, lambda: 1.5, h: 0.5, n: 1 }
    }

    #[test]
    fn box_mode_values() {
        let s = box_spec();
        let e = s.edges();
        let mid = [s.x0[0] + e[0] / 2.0, s.x0[1] + e[1] / 2.0, 0.5];
        assert!((s.value(&mid) - 1.0).abs() < 1e-15);
        assert_eq!(s.value(&[0.1, 0.5, 0.5]), 0.0);
        assert_eq!(s.value(&[s.x0[0], 0.45, 0.5]), 0.0);
        // constant in x3 inside the support
        let a = s.value(&[0.35, 0.4, 0.3]);
        assert!((a - s.value(&[0.35, 0.4, 0.7])).abs() < 1e-15);
    }

    #[test]
    fn box_mode_preconditions() {
        let g = StructuredGrid::unit(3, 16).unwrap();
        let dom = BoxDomain::unit(3).unwrap();
        let p = build_box_mode(&g, &box_spec(), &dom, DEFAULT_MIN_EDGE_CELLS).unwrap();
        assert_eq!(p.nodal.len(), 15 * 15 * 15);
        let mut s = box_spec();
        s.lambda = 2.5;
        assert!(matches!(build_box_mode(&g, &s, &dom, 2.0), Err(Error::InvalidArgument(_))));
        let mut s = box_spec();
        s.lambda = 1.0 + 1e-3;
        assert!(matches!(build_box_mode(&g, &s, &dom, 2.0), Err(Error::Probe(_))));
        let small = BoxDomain::new(vec![0.0; 3], vec![0.5; 3]).unwrap();
        assert!(matches!(build_box_mode(&g, &box_spec(), &small, 2.0), Err(Error::Probe(_))));
    }

    #[test]
    fn box_constants_are_checked() {
        let spec = box_spec();
        let ok = DiagonalTensorField::constant(BoxDomain::unit(3).unwrap(), vec![1.0, 2.0, 1.5]).unwrap();
        verify_box_constants(&ok, &spec).unwrap();
        let bad = DiagonalTensorField::constant(BoxDomain::unit(3).unwrap(), vec![1.0, 3.0, 1.5]).unwrap();
        assert!(verify_box_constants(&bad, &spec).is_err());
    }

    #[test]
    fn probe_csv_layout() {
        let g = StructuredGrid::unit(3, 2).unwrap();
        let mut out = Vec::new();
        write_probe_csv(&g, &[0.25], false, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x,y,z,value\n0.5,0.5,0.5,0.25\n");
        let mut out = Vec::new();
        write_probe_csv(&g, &[0.0], true, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x,y,z,value\n");
    }
}
