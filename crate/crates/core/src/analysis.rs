//! Experiment drivers: spectrum reports, interval-fill diagnostics, probe
//! convergence studies and the constant-coefficient oracle check.
//!
//! This layer works in `f64`.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::assembly::{assemble_laplacian, assemble_stiffness, quadrature_hull, QuadratureKind, QuadratureRule};
use crate::coefficients::{estimate_hull, DiagonalTensorField, FieldDescriptor, HullEstimate};
use crate::constructions::{
    box_mode_metrics, build_box_mode, build_vr, vr_metrics, vr_theoretical_bound, BoxModeSpec,
};
use crate::eig::{dense_generalized_eig, lobpcg, DenseOptions, EigenMethod, EigenResult, LobpcgOptions, Which};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{BoxDomain, GridDescriptor, StructuredGrid};
use crate::oracle::{max_relative_mismatch, tensor_product_eigenvalues};

/// Slack on the hull inclusion test.
pub const DEFAULT_TOL_INCL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverChoice {
    /// Full spectrum.
    Dense { cap: usize },
    /// `block` smallest and `block` largest eigenvalues.
    Lobpcg { block: usize, tol: f64, max_iter: usize, seed: u64 },
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Dense { cap: crate::eig::DEFAULT_DENSE_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumOptions {
    pub solver: SolverChoice,
    pub quadrature: QuadratureKind,
    /// Refinement levels scanned by the sampled hull estimate.
    pub oversample: usize,
    pub tol_incl: f64,
    /// Interval for `max_gap`; the hull when absent.
    pub gap_interval: Option<[f64; 2]>,
    pub want_vectors: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            solver: SolverChoice::default(),
            quadrature: QuadratureKind::Gauss2,
            oversample: 2,
            tol_incl: DEFAULT_TOL_INCL,
            gap_interval: None,
            want_vectors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverMeta {
    pub method: EigenMethod,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest stored pair residual, when vectors were computed.
    pub max_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ReportTimings {
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub grid: GridDescriptor,
    pub field: FieldDescriptor,
    pub quadrature: &'static str,
    /// Union of sampled coefficient values and values at the quadrature points.
    pub hull: HullEstimate,
    pub tol_incl: f64,
    pub eigenvalues: Vec<f64>,
    pub inclusion_ok: bool,
    /// Largest gap within `gap_interval`, endpoints included; absent for partial spectra.
    pub max_gap: Option<f64>,
    pub gap_interval: [f64; 2],
    pub solver: SolverMeta,
    pub timings: ReportTimings,
}

impl SpectrumReport {
    /// Pretty JSON with the `timings` object removed.
    pub fn to_json_without_timings(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Assembles the pencil, computes its spectrum and compares it with the
/// coefficient hull. Returns the solver output alongside the report.
pub fn run_spectrum(
    grid: &StructuredGrid<f64>,
    field: &DiagonalTensorField<f64>,
    opts: &SpectrumOptions,
) -> Result<(SpectrumReport, EigenResult<f64>)> {
    let t0 = Instant::now();
    let quad = QuadratureRule::new(opts.quadrature, grid.dim());
    let a = assemble_stiffness(grid, field, &quad)?;
    let l = assemble_laplacian(grid, &quad);
    let hull = estimate_hull(field, grid, opts.oversample).merge(&quadrature_hull(field, grid, &quad));
    let assembly_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (result, tol, full) = match opts.solver {
        SolverChoice::Dense { cap } => {
            (dense_generalized_eig(&a, &l, opts.want_vectors, &DenseOptions { cap })?, None, true)
        }
        SolverChoice::Lobpcg { block, tol, max_iter, seed } => {
            let n = a.order();
            let block = block.min(n);
            let base = LobpcgOptions { block, tol, max_iter, seed, ..LobpcgOptions::default() };
            let lo = lobpcg(&a, &l, &LobpcgOptions { which: Which::Smallest, ..base })?;
            let hi = lobpcg(&a, &l, &LobpcgOptions { which: Which::Largest, ..base })?;
            (merge_ends(lo, hi, opts.want_vectors)?, Some(tol), 2 * block >= n)
        }
    };
    let solve_seconds = t1.elapsed().as_secs_f64();

    let inclusion_ok = result.eigenvalues.iter().all(|&v| hull.contains(v, opts.tol_incl));
    let gap_interval = opts.gap_interval.unwrap_or([hull.lo, hull.hi]);
    let max_gap = if !full {
        None
    } else if gap_interval[1] > gap_interval[0] {
        Some(interval_fill_check(&result.eigenvalues, gap_interval[0], gap_interval[1], f64::INFINITY)?.worst_gap)
    } else {
        Some(0.0)
    };
    let report = SpectrumReport {
        grid: grid.descriptor(),
        field: field.descriptor(),
        quadrature: opts.quadrature.name(),
        hull,
        tol_incl: opts.tol_incl,
        eigenvalues: result.eigenvalues.clone(),
        inclusion_ok,
        max_gap,
        gap_interval,
        solver: SolverMeta {
            method: result.method,
            seed: result.seed,
            tol,
            converged: result.converged,
            iterations: result.iterations,
            max_residual: result.residuals.iter().copied().reduce(f64::max),
        },
        timings: ReportTimings { assembly_seconds, solve_seconds },
    };
    Ok((report, result))
}

/// Concatenates the two ends of the spectrum, dropping the overlap when the
/// blocks cover every eigenvalue.
fn merge_ends(lo: EigenResult<f64>, hi: EigenResult<f64>, want_vectors: bool) -> Result<EigenResult<f64>> {
    let n = lo.eigenvectors.as_ref().map_or(0, |v| v.rows());
    let k = lo.len();
    // Keep the upper block only where it does not repeat the lower one.
    let skip = (2 * k).saturating_sub(n);
    let mut eigenvalues = lo.eigenvalues.clone();
    eigenvalues.extend_from_slice(&hi.eigenvalues[skip..]);
    let mut residuals = lo.residuals.clone();
    residuals.extend_from_slice(&hi.residuals[skip..]);
    let eigenvectors = if want_vectors {
        let (a, b) = (lo.eigenvectors.as_ref(), hi.eigenvectors.as_ref());
        match (a, b) {
            (Some(a), Some(b)) => {
                let cols: Vec<Vec<f64>> =
                    (0..k).map(|j| a.column(j)).chain((skip..b.cols()).map(|j| b.column(j))).collect();
                Some(crate::linalg::DenseMatrix::from_columns(&cols)?)
            }
            _ => None,
        }
    } else {
        None
    };
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
        residuals,
        method: EigenMethod::Lobpcg,
        seed: lo.seed,
        converged: lo.converged && hi.converged,
        iterations: lo.iterations + hi.iterations,
        timings: crate::eig::Timings { seconds: lo.timings.seconds + hi.timings.seconds },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FillCheck {
    pub ok: bool,
    pub worst_gap: f64,
}

/// Whether every closed subinterval of `[a, b]` of width `delta` contains an
/// eigenvalue. `worst_gap` is the largest gap between consecutive eigenvalues
/// inside `[a, b]`, with `a` and `b` included as virtual endpoints.
pub fn interval_fill_check(eigenvalues: &[f64], a: f64, b: f64, delta: f64) -> Result<FillCheck> {
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("fill interval [{a}, {b}] is empty")));
    }
    let mut pts: Vec<f64> = eigenvalues.iter().copied().filter(|&v| v >= a && v <= b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    let worst_gap = pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(FillCheck { ok: worst_gap <= delta, worst_gap })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VrStudyOptions {
    pub quadrature: QuadratureKind,
    pub resolvability_factor: f64,
    /// Lattice points per axis for the sampled bound.
    pub bound_sampling: usize,
}

impl Default for VrStudyOptions {
    fn default() -> Self {
        Self {
            quadrature: QuadratureKind::Gauss2,
            resolvability_factor: crate::constructions::DEFAULT_RESOLVABILITY_FACTOR,
            bound_sampling: 41,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VrStudyRow {
    pub r: f64,
    pub cells: usize,
    pub lambda: f64,
    pub l_norm: f64,
    pub residual: f64,
    pub bound: f64,
    pub cg_iterations: usize,
}

impl VrStudyRow {
    /// `residual^2 - bound`; positive values exceed the continuum bound.
    pub fn excess(&self) -> f64 {
        self.residual * self.residual - self.bound
    }
}

/// One row per `(cells, r)` pair, grids outermost, in the given order.
///
/// Each grid is `cells^3` uniform cells on the field's domain; `lambda` is
/// `k_axis(x0)`.
pub fn vr_convergence_study(
    field: &DiagonalTensorField<f64>,
    x0: &[f64],
    axis: usize,
    r_list: &[f64],
    cells_list: &[usize],
    opts: &VrStudyOptions,
) -> Result<Vec<VrStudyRow>> {
    let lambda = *field
        .eval(x0)?
        .get(axis)
        .ok_or_else(|| Error::InvalidArgument(format!("axis {axis} out of range")))?;
    let mut rows = Vec::with_capacity(r_list.len() * cells_list.len());
    for &cells in cells_list {
        let grid = StructuredGrid::new(field.domain().clone(), &vec![cells; field.dim()])?;
        // Validate every radius before assembling.
        let probes = r_list
            .iter()
            .map(|&r| build_vr(&grid, x0, axis, r, opts.resolvability_factor))
            .collect::<Result<Vec<_>>>()?;
        let quad = QuadratureRule::new(opts.quadrature, grid.dim());
        let a = assemble_stiffness(&grid, field, &quad)?;
        let l = assemble_laplacian(&grid, &quad);
        for probe in &probes {
            let m = vr_metrics(&a, &l, lambda, probe)?;
            rows.push(VrStudyRow {
                r: probe.r,
                cells,
                lambda,
                l_norm: m.l_norm,
                residual: m.residual_l_norm,
                bound: vr_theoretical_bound(field, x0, axis, probe.r, opts.bound_sampling)?,
                cg_iterations: m.cg_iterations,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxModeRow {
    pub cells: usize,
    pub rayleigh: f64,
    pub rayleigh_error: f64,
    pub l_norm: f64,
    pub residual: f64,
    pub cg_iterations: usize,
}

/// Box-mode metrics over a ladder of uniform `cells^3` grids on the field's domain.
pub fn box_mode_study(
    field: &DiagonalTensorField<f64>,
    spec: &BoxModeSpec,
    constancy: &BoxDomain<f64>,
    cells_list: &[usize],
    min_edge_cells: f64,
    quadrature: QuadratureKind,
) -> Result<Vec<BoxModeRow>> {
    crate::constructions::verify_box_constants(field, spec)?;
    let mut rows = Vec::with_capacity(cells_list.len());
    let grids = cells_list
        .iter()
        .map(|&c| StructuredGrid::new(field.domain().clone(), &vec![c; field.dim()]))
        .collect::<Result<Vec<_>>>()?;
    let probes = grids
        .iter()
        .map(|g| build_box_mode(g, spec, constancy, min_edge_cells))
        .collect::<Result<Vec<_>>>()?;
    for ((grid, probe), &cells) in grids.iter().zip(&probes).zip(cells_list) {
        let quad = QuadratureRule::new(quadrature, grid.dim());
        let a = assemble_stiffness(grid, field, &quad)?;
        let l = assemble_laplacian(grid, &quad);
        let m = box_mode_metrics(&a, &l, spec.lambda, probe)?;
        rows.push(BoxModeRow {
            cells,
            rayleigh: m.rayleigh,
            rayleigh_error: (m.rayleigh - spec.lambda).abs(),
            l_norm: m.l_norm,
            residual: m.residual_l_norm,
            cg_iterations: m.cg_iterations,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityRow {
    pub lambda: f64,
    /// Coordinates of the node where the eigenvector is largest in magnitude.
    pub argmax: Vec<f64>,
    /// Coefficient values at that node.
    pub kappa: Vec<f64>,
}

/// For each eigenpair, the node of largest `|x_j|` and the coefficient there.
/// Exploratory; nothing is asserted about the pairing.
pub fn eigenvector_locality_probe(
    result: &EigenResult<f64>,
    field: &DiagonalTensorField<f64>,
    grid: &StructuredGrid<f64>,
) -> Result<Vec<LocalityRow>> {
    let v = result.eigenvectors.as_ref().ok_or(Error::MissingEigenvectors)?;
    if v.rows() != grid.interior_dofs() {
        return Err(Error::DimensionMismatch { expected: grid.interior_dofs(), got: v.rows() });
    }
    (0..result.len())
        .map(|j| {
            let col = v.column(j);
            let (dof, _) = col
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best });
            let argmax = grid.node_coords(dof)?;
            let kappa = field.eval(&argmax)?;
            Ok(LocalityRow { lambda: result.eigenvalues[j], argmax, kappa })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub grid: GridDescriptor,
    pub coefficients: Vec<f64>,
    pub eigenvalues: usize,
    pub max_relative_mismatch: f64,
    pub seconds: f64,
}

/// Dense spectrum of an assembled pencil against the tensor-product oracle
/// for `K = diag(k)`.
pub fn oracle_check_pencil(
    a: &CsrMatrix<f64>,
    l: &CsrMatrix<f64>,
    grid: &StructuredGrid<f64>,
    k: &[f64],
    cap: usize,
) -> Result<OracleCheck> {
    let start = Instant::now();
    let computed = dense_generalized_eig(a, l, false, &DenseOptions { cap })?;
    let oracle = tensor_product_eigenvalues(grid, k)?;
    Ok(OracleCheck {
        grid: grid.descriptor(),
        coefficients: k.to_vec(),
        eigenvalues: oracle.len(),
        max_relative_mismatch: max_relative_mismatch(&computed.eigenvalues, &oracle)?,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Assembles the constant-coefficient pencil with the two-point Gauss rule
/// and runs [`oracle_check_pencil`].
pub fn oracle_check(grid: &StructuredGrid<f64>, k: &[f64], cap: usize) -> Result<OracleCheck> {
    let field = DiagonalTensorField::constant(grid.domain().clone(), k.to_vec())?;
    let quad = QuadratureRule::new(QuadratureKind::Gauss2, grid.dim());
    let a = assemble_stiffness(grid, &field, &quad)?;
    let l = assemble_laplacian(grid, &quad);
    oracle_check_pencil(&a, &l, grid, k, cap)
}

/// `index,eigenvalue` rows.
pub fn write_eigenvalues_csv<W: Write>(eigenvalues: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "index,eigenvalue")?;
    for (i, v) in eigenvalues.iter().enumerate() {
        writeln!(w, "{i},{v:e}")?;
    }
    Ok(())
}

pub fn write_vr_study_csv<W: Write>(rows: &[VrStudyRow], mut w: W) -> Result<()> {
    writeln!(w, "r,cells,lambda,l_norm,residual,bound,excess,cg_iterations")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{}",
            r.r,
            r.cells,
            r.lambda,
            r.l_norm,
            r.residual,
            r.bound,
            r.excess(),
            r.cg_iterations
        )?;
    }
    Ok(())
}

pub fn write_box_mode_csv<W: Write>(rows: &[BoxModeRow], mut w: W) -> Result<()> {
    writeln!(w, "cells,rayleigh,rayleigh_error,l_norm,residual,cg_iterations")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{}",
            r.cells, r.rayleigh, r.rayleigh_error, r.l_norm, r.residual, r.cg_iterations
        )?;
    }
    Ok(())
}

pub fn write_locality_csv<W: Write>(rows: &[LocalityRow], mut w: W) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.argmax.len());
    let mut header = vec!["lambda".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.extend((0..d).map(|k| format!("kappa{k}")));
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut fields = vec![format!("{:e}", r.lambda)];
        fields.extend(r.argmax.iter().map(|x| x.to_string()));
        fields.extend(r.kappa.iter().map(|x| format!("{x:e}")));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, S: Serialize>(value: &S, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::FieldPreset;

    fn cube() -> BoxDomain<f64> {
        BoxDomain::unit(3).unwrap()
    }

    #[test]
    fn fill_check_examples() {
        let e = [1.0, 1.5, 2.0];
        let c = interval_fill_check(&e, 1.0, 2.0, 0.6).unwrap();
        assert!(c.ok);
        assert_eq!(c.worst_gap, 0.5);
        assert!(!interval_fill_check(&e, 1.0, 2.0, 0.4).unwrap().ok);
        // eigenvalues outside the interval are ignored; endpoints count
        let c = interval_fill_check(&[0.5, 1.2, 2.5], 1.0, 2.0, 1.0).unwrap();
        assert!((c.worst_gap - 0.8).abs() < 1e-15);
        assert!(interval_fill_check(&e, 2.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn constant_field_spectrum() {
        let g = StructuredGrid::unit(3, 4).unwrap();
        let f = DiagonalTensorField::constant(cube(), vec![1.75; 3]).unwrap();
        let (rep, _) = run_spectrum(&g, &f, &SpectrumOptions::default()).unwrap();
        assert!(rep.eigenvalues.iter().all(|v| (v - 1.75).abs() < 1e-12));
        assert_eq!((rep.hull.lo, rep.hull.hi), (1.75, 1.75));
        assert!(rep.inclusion_ok);
        assert_eq!(rep.max_gap, Some(0.0));
    }

    #[test]
    fn anisotropic_and_affine_inclusion() {
        let g = StructuredGrid::unit(3, 6).unwrap();
        let f = FieldPreset::ConstantAnisotropic.build(cube()).unwrap();
        let (rep, _) = run_spectrum(&g, &f, &SpectrumOptions::default()).unwrap();
        assert!(rep.inclusion_ok);
        assert_eq!((rep.hull.lo, rep.hull.hi), (1.0, 3.0));

        let f = FieldPreset::AxisAffine.build(cube()).unwrap();
        let opts = SpectrumOptions { want_vectors: true, ..Default::default() };
        let (rep, res) = run_spectrum(&g, &f, &opts).unwrap();
        assert!(rep.inclusion_ok);
        assert_eq!((rep.hull.lo, rep.hull.hi), (1.0, 2.0));
        // Rayleigh quotients of the returned vectors stay inside the hull
        let quad = QuadratureRule::new(QuadratureKind::Gauss2, 3);
        let a = assemble_stiffness(&g, &f, &quad).unwrap();
        let l = assemble_laplacian(&g, &quad);
        for j in 0..res.len() {
            let q = crate::eig::rayleigh_quotient(&a, &l, &res.eigenvector(j).unwrap()).unwrap();
            assert!((1.0 - 1e-12..=2.0 + 1e-12).contains(&q));
        }
    }

    #[test]
    fn lobpcg_report_covers_both_ends() {
        let g = StructuredGrid::unit(3, 5).unwrap();
        let f = FieldPreset::SmoothRadial.build(cube()).unwrap();
        let dense = run_spectrum(&g, &f, &SpectrumOptions::default()).unwrap().0;
        let opts = SpectrumOptions {
            solver: SolverChoice::Lobpcg { block: 3, tol: 1e-9, max_iter: 300, seed: 2 },
            ..Default::default()
        };
        let (rep, _) = run_spectrum(&g, &f, &opts).unwrap();
        assert_eq!(rep.eigenvalues.len(), 6);
        assert!(rep.max_gap.is_none());
        let n = dense.eigenvalues.len();
        let expect: Vec<f64> = dense.eigenvalues[..3].iter().chain(&dense.eigenvalues[n - 3..]).copied().collect();
        for (x, y) in rep.eigenvalues.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn report_json_is_reproducible() {
        let g = StructuredGrid::unit(3, 4).unwrap();
        let f = FieldPreset::PiecewiseInclusion.build(cube()).unwrap();
        let a = run_spectrum(&g, &f, &SpectrumOptions::default()).unwrap().0;
        let b = run_spectrum(&g, &f, &SpectrumOptions::default()).unwrap().0;
        let ja = a.to_json_without_timings().unwrap();
        assert_eq!(ja, b.to_json_without_timings().unwrap());
        assert!(!ja.contains("timings"));
        assert!(ja.contains("\"inclusion_ok\": true"));
    }

    #[test]
    fn locality_table() {
        let g = StructuredGrid::unit(3, 4).unwrap();
        let f = FieldPreset::ConstantAnisotropic.build(cube()).unwrap();
        let opts = SpectrumOptions { want_vectors: true, ..Default::default() };
        let (_, res) = run_spectrum(&g, &f, &opts).unwrap();
        let rows = eigenvector_locality_probe(&res, &f, &g).unwrap();
        assert_eq!(rows.len(), 27);
        assert!(rows.iter().all(|r| r.kappa == vec![1.0, 2.0, 3.0]));
        let (_, no_vec) = run_spectrum(&g, &f, &SpectrumOptions::default()).unwrap();
        assert!(matches!(eigenvector_locality_probe(&no_vec, &f, &g), Err(Error::MissingEigenvectors)));
        let mut out = Vec::new();
        write_locality_csv(&rows, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("lambda,x0,x1,x2,kappa0,kappa1,kappa2\n"));
    }

    #[test]
    fn oracle_check_small() {
        let g = StructuredGrid::unit(3, 5).unwrap();
        let c = oracle_check(&g, &[1.0, 2.0, 3.0], 4000).unwrap();
        assert_eq!(c.eigenvalues, 64);
        assert!(c.max_relative_mismatch <= 1e-10);
        let c = oracle_check(&g, &[0.7; 3], 4000).unwrap();
        assert!(c.max_relative_mismatch <= 1e-12);
    }

    #[test]
    fn vr_study_on_constant_field() {
        let f = DiagonalTensorField::constant(cube(), vec![2.0; 3]).unwrap();
        let rows = vr_convergence_study(&f, &[0.5; 3], 0, &[0.35, 0.3], &[12], &VrStudyOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.residual <= 1e-9 * r.l_norm);
            assert_eq!(r.bound, 0.0);
        }
        let mut out = Vec::new();
        write_vr_study_csv(&rows, &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("r,cells,lambda,l_norm,residual,bound,excess,cg_iterations\n0.35,12,"));
        assert!(matches!(
            vr_convergence_study(&f, &[0.5; 3], 0, &[0.2], &[12], &VrStudyOptions::default()),
            Err(Error::Resolvability { .. })
        ));
    }

    #[test]
    fn box_mode_study_shapes() {
        let f = DiagonalTensorField::constant(cube(), vec![1.0, 2.0, 1.5]).unwrap();
        let spec = BoxModeSpec { x0: [0.3, 0.3, 0.25], k1: 1.0, k2: 2.0, lambda: 1.5, h: 0.5, n: 1 };
        let rows = box_mode_study(&f, &spec, &cube(), &[8, 12], 2.0, QuadratureKind::Gauss2).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.rayleigh > 1.0 && r.rayleigh < 2.0));
        let bad = DiagonalTensorField::constant(cube(), vec![1.0, 2.5, 1.5]).unwrap();
        assert!(box_mode_study(&bad, &spec, &cube(), &[8], 2.0, QuadratureKind::Gauss2).is_err());
    }

    #[test]
    fn eigenvalue_csv() {
        let mut out = Vec::new();
        write_eigenvalues_csv(&[1.0, 2.5], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "index,eigenvalue\n0,1e0\n1,2.5e0\n");
    }
}
