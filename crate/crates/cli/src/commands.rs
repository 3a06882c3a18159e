//! Subcommand bodies. Each validates its whole configuration first, then runs.

use serde::Serialize;

use precond_spectrum::analysis::{
    box_mode_study, eigenvector_locality_probe, interval_fill_check, oracle_check_pencil,
    run_spectrum, vr_convergence_study, write_box_mode_csv, write_eigenvalues_csv, write_json,
    write_locality_csv, write_vr_study_csv, BoxModeRow, SpectrumReport, VrStudyRow,
};
use precond_spectrum::assembly::{assemble_laplacian, assemble_stiffness, QuadratureKind, QuadratureRule};
use precond_spectrum::coefficients::DiagonalTensorField;
use precond_spectrum::eig::EigenResult;
use precond_spectrum::mesh::StructuredGrid;
use precond_spectrum::ErrorClass;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::OutputDir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] precond_spectrum::Error),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Numerical | ErrorClass::Io => 2,
            },
            CliError::Assertion(_) => 3,
        }
    }
}

pub type CmdResult = Result<(), CliError>;

fn spectrum_core(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(StructuredGrid<f64>, DiagonalTensorField<f64>, SpectrumReport, EigenResult<f64>), CliError> {
    let grid = cfg.grid()?;
    let field = cfg.field()?;
    let opts = cfg.spectrum_options(seed)?;
    let (report, result) = run_spectrum(&grid, &field, &opts)?;
    log::info!(
        "{} eigenvalues in [{:.6e}, {:.6e}], hull [{:.6e}, {:.6e}]",
        report.eigenvalues.len(),
        report.eigenvalues.first().copied().unwrap_or(f64::NAN),
        report.eigenvalues.last().copied().unwrap_or(f64::NAN),
        report.hull.lo,
        report.hull.hi,
    );
    Ok((grid, field, report, result))
}

fn emit_spectrum(out: &OutputDir, report: &SpectrumReport) -> CmdResult {
    out.write_atomic("report.json", |w| write_json(report, w))?;
    out.write_atomic("eigenvalues.csv", |w| write_eigenvalues_csv(&report.eigenvalues, w))?;
    Ok(())
}

fn check_converged(report: &SpectrumReport) -> CmdResult {
    if report.solver.converged {
        Ok(())
    } else {
        Err(precond_spectrum::Error::NotConverged {
            iterations: report.solver.iterations,
            residual: report.solver.max_residual.unwrap_or(f64::NAN),
        }
        .into())
    }
}

pub fn spectrum(cfg: &ExperimentConfig, seed: u64, out: &OutputDir) -> CmdResult {
    let (grid, field, report, result) = spectrum_core(cfg, seed)?;
    emit_spectrum(out, &report)?;
    if cfg.spectrum.locality {
        let rows = eigenvector_locality_probe(&result, &field, &grid)?;
        out.write_atomic("locality.csv", |w| write_locality_csv(&rows, w))?;
    }
    check_converged(&report)?;
    println!("inclusion_ok = {}", report.inclusion_ok);
    if let Some(gap) = report.max_gap {
        println!("max_gap = {gap:e}");
    }
    if !report.inclusion_ok {
        return Err(CliError::Assertion(format!(
            "eigenvalues leave the hull [{:e}, {:e}] by more than {:e}",
            report.hull.lo, report.hull.hi, report.tol_incl
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct FillSummary {
    interval: [f64; 2],
    delta: f64,
    ok: bool,
    worst_gap: f64,
}

pub fn fill_check(cfg: &ExperimentConfig, seed: u64, out: &OutputDir) -> CmdResult {
    let fill = cfg.fill()?.clone();
    let (_, _, report, _) = spectrum_core(cfg, seed)?;
    if report.max_gap.is_none() {
        return Err(ConfigError("solver.method: fill-check needs the full spectrum (dense)".into()).into());
    }
    let [a, b] = fill.interval;
    let check = interval_fill_check(&report.eigenvalues, a, b, fill.delta)?;
    emit_spectrum(out, &report)?;
    let summary = FillSummary { interval: fill.interval, delta: fill.delta, ok: check.ok, worst_gap: check.worst_gap };
    out.write_atomic("fill.json", |w| write_json(&summary, w))?;
    println!("worst_gap = {:e} (delta {:e})", check.worst_gap, fill.delta);
    if !check.ok {
        return Err(CliError::Assertion(format!(
            "[{a}, {b}] has a gap of {:e} > delta {:e}",
            check.worst_gap, fill.delta
        )));
    }
    Ok(())
}

pub fn vr_study(cfg: &ExperimentConfig, out: &OutputDir) -> CmdResult {
    let plan = cfg.vr()?;
    let field = cfg.field()?;
    let rows = vr_convergence_study(&field, &plan.x0, plan.axis, &plan.r_list, &plan.cells, &plan.opts)?;
    out.write_atomic("vr_study.csv", |w| write_vr_study_csv(&rows, w))?;
    for row in &rows {
        println!(
            "cells {:>3} r {:.4} residual {:.6e} bound {:.6e}",
            row.cells, row.r, row.residual, row.bound
        );
    }
    if plan.checks.residual_decreasing {
        check_vr_decreasing(&rows)?;
    }
    if plan.checks.within_bound {
        let slack = plan.checks.bound_slack;
        if let Some(row) = rows.iter().find(|r| r.residual * r.residual > r.bound * (1.0 + slack)) {
            return Err(CliError::Assertion(format!(
                "cells {} r {}: residual^2 {:e} exceeds bound {:e}",
                row.cells,
                row.r,
                row.residual * row.residual,
                row.bound
            )));
        }
    }
    Ok(())
}

/// Within each grid, rows ordered by decreasing `r` must have strictly decreasing residuals.
fn check_vr_decreasing(rows: &[VrStudyRow]) -> CmdResult {
    let mut cells: Vec<usize> = rows.iter().map(|r| r.cells).collect();
    cells.dedup();
    for c in cells {
        let mut group: Vec<&VrStudyRow> = rows.iter().filter(|r| r.cells == c).collect();
        group.sort_by(|a, b| b.r.total_cmp(&a.r));
        for w in group.windows(2) {
            if !(w[1].residual < w[0].residual) {
                return Err(CliError::Assertion(format!(
                    "residual_decreasing: cells {c}, r {} -> {} gives {:e} -> {:e}",
                    w[0].r, w[1].r, w[0].residual, w[1].residual
                )));
            }
        }
    }
    Ok(())
}

pub fn box_mode(cfg: &ExperimentConfig, out: &OutputDir) -> CmdResult {
    let plan = cfg.box_mode()?;
    let field = cfg.field()?;
    let rows = box_mode_study(&field, &plan.spec, &plan.constancy, &plan.cells, plan.min_edge_cells, cfg.quadrature()?)?;
    out.write_atomic("box_mode.csv", |w| write_box_mode_csv(&rows, w))?;
    for row in &rows {
        println!(
            "cells {:>3} rayleigh {:.12} residual {:.6e} relative {:.6e}",
            row.cells,
            row.rayleigh,
            row.residual,
            row.residual / row.l_norm
        );
    }
    let checks = &plan.checks;
    if checks.residual_decreasing {
        strictly_decreasing("residual_decreasing", &rows, |r| r.residual)?;
    }
    if checks.relative_residual_decreasing {
        strictly_decreasing("relative_residual_decreasing", &rows, |r| r.residual / r.l_norm)?;
    }
    if checks.rayleigh_error_decreasing {
        strictly_decreasing("rayleigh_error_decreasing", &rows, |r| r.rayleigh_error)?;
    }
    Ok(())
}

fn strictly_decreasing(name: &str, rows: &[BoxModeRow], metric: impl Fn(&BoxModeRow) -> f64) -> CmdResult {
    for w in rows.windows(2) {
        let (a, b) = (metric(&w[0]), metric(&w[1]));
        if !(b < a) {
            return Err(CliError::Assertion(format!(
                "{name}: cells {} -> {} gives {a:e} -> {b:e}",
                w[0].cells, w[1].cells
            )));
        }
    }
    Ok(())
}

pub fn oracle_check(cfg: &ExperimentConfig, out: &OutputDir) -> CmdResult {
    let grid = cfg.grid()?;
    let k = cfg.constant_values()?;
    let field = cfg.field()?;
    let cap = cfg.dense_cap()?;
    let tol = cfg.oracle_tol()?;
    let quad = QuadratureRule::new(QuadratureKind::Gauss2, grid.dim());
    let mut a = assemble_stiffness(&grid, &field, &quad)?;
    let l = assemble_laplacian(&grid, &quad);
    if cfg.oracle.corrupt != 0.0 {
        log::warn!("corrupting the first stiffness entry by a relative {:e}", cfg.oracle.corrupt);
        if let Some(v) = a.values_mut().first_mut() {
            *v *= 1.0 + cfg.oracle.corrupt;
        }
    }
    let check = oracle_check_pencil(&a, &l, &grid, &k, cap)?;
    out.write_atomic("oracle.json", |w| write_json(&check, w))?;
    println!("max relative mismatch = {:e} over {} eigenvalues", check.max_relative_mismatch, check.eigenvalues);
    if !(check.max_relative_mismatch <= tol) {
        return Err(CliError::Assertion(format!(
            "oracle mismatch {:e} exceeds {tol:e}",
            check.max_relative_mismatch
        )));
    }
    Ok(())
}

