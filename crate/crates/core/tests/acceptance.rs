//! End-to-end acceptance checks. Runs without the libtest harness so that the
//! per-criterion verdicts are always printed.

use std::f64::consts::PI;
use std::time::Instant;

use precond_spectrum::analysis::{
    box_mode_study, interval_fill_check, run_spectrum, vr_convergence_study, write_eigenvalues_csv, write_json,
    SpectrumOptions, VrStudyOptions,
};
use precond_spectrum::assembly::{assemble_laplacian, assemble_stiffness, QuadratureKind, QuadratureRule};
use precond_spectrum::coefficients::{DiagonalTensorField, FieldPreset};
use precond_spectrum::constructions::{
    gradient_energy, max_fd_gradient, monte_carlo_volumes, BoxModeSpec, DEFAULT_MIN_EDGE_CELLS,
};
use precond_spectrum::eig::{dense_generalized_eig, lobpcg, DenseOptions, LobpcgOptions, Which};
use precond_spectrum::mesh::{BoxDomain, StructuredGrid};
use precond_spectrum::oracle::{max_relative_mismatch, tensor_product_eigenvalues};
use precond_spectrum::{CsrF64, GridF64};

type Verdict = Result<String, String>;

fn cube() -> BoxDomain<f64> {
    BoxDomain::unit(3).unwrap()
}

fn pencil(grid: &GridF64, field: &DiagonalTensorField<f64>) -> (CsrF64, CsrF64) {
    let q = QuadratureRule::new(QuadratureKind::Gauss2, 3);
    (assemble_stiffness(grid, field, &q).unwrap(), assemble_laplacian(grid, &q))
}

fn check(cond: bool, msg: String) -> Verdict {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let g = StructuredGrid::unit(3, 8).unwrap();
    let f = DiagonalTensorField::constant(cube(), vec![1.0, 2.0, 3.0]).unwrap();
    let (a, l) = pencil(&g, &f);
    let dense = dense_generalized_eig(&a, &l, false, &DenseOptions::default()).map_err(|e| e.to_string())?;
    let oracle = tensor_product_eigenvalues(&g, &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    let mismatch = max_relative_mismatch(&dense.eigenvalues, &oracle).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        dense.eigenvalues.len() == 343 && mismatch <= 1e-10 && secs < 30.0,
        format!("343 DOFs, max relative error {mismatch:.2e} (<= 1e-10), {secs:.2} s (< 30 s)"),
    )
}

fn criterion_2() -> Verdict {
    let g = StructuredGrid::unit(3, 8).unwrap();
    let f = DiagonalTensorField::identity(cube()).unwrap();
    let (a, l) = pencil(&g, &f);
    let same = a.row_ptr() == l.row_ptr() && a.col_idx() == l.col_idx() && a.values() == l.values();
    let r = dense_generalized_eig(&a, &l, false, &DenseOptions::default()).map_err(|e| e.to_string())?;
    let worst = r.eigenvalues.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    check(same && worst <= 1e-12, format!("A == L entrywise: {same}, max |lambda - 1| = {worst:.2e}"))
}

fn criterion_3() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for cells in [8, 12] {
        let g = StructuredGrid::unit(3, cells).unwrap();
        for preset in FieldPreset::ALL {
            let f = preset.build(cube()).unwrap();
            let (rep, _) = run_spectrum(&g, &f, &SpectrumOptions::default()).map_err(|e| e.to_string())?;
            let lo = rep.eigenvalues[0];
            let hi = *rep.eigenvalues.last().unwrap();
            let inside = lo >= rep.hull.lo - 1e-9 && hi <= rep.hull.hi + 1e-9;
            ok &= inside && rep.inclusion_ok;
            if !inside {
                notes.push(format!(
                    "{}@{cells}: [{lo}, {hi}] outside [{}, {}]",
                    preset.name(),
                    rep.hull.lo,
                    rep.hull.hi
                ));
            }
        }
    }
    check(ok, if ok { "5 presets x {8^3, 12^3} inside hull +- 1e-9".into() } else { notes.join("; ") })
}

fn fill_gap(cells: usize) -> Result<(f64, f64, bool), String> {
    let g = StructuredGrid::unit(3, cells).unwrap();
    let k = [1.0, 2.0, 1.0];
    let oracle = tensor_product_eigenvalues(&g, &k).map_err(|e| e.to_string())?;
    let oracle_fill = interval_fill_check(&oracle, 1.0, 2.0, 0.1).map_err(|e| e.to_string())?;
    let f = DiagonalTensorField::constant(cube(), k.to_vec()).unwrap();
    let (rep, _) = run_spectrum(&g, &f, &SpectrumOptions::default()).map_err(|e| e.to_string())?;
    let fill = interval_fill_check(&rep.eigenvalues, 1.0, 2.0, 0.1).map_err(|e| e.to_string())?;
    let agree = max_relative_mismatch(&rep.eigenvalues, &oracle).map_err(|e| e.to_string())? <= 1e-10;
    Ok((oracle_fill.worst_gap, fill.worst_gap, agree && oracle_fill.ok && fill.ok))
}

fn criterion_4() -> Verdict {
    let (o12, g12, ok12) = fill_gap(12)?;
    let (_, g8, _) = fill_gap(8)?;
    check(
        ok12 && g12 < g8,
        format!("oracle gap {o12:.4e}, pencil gap at 12^3 {g12:.4e} (<= 0.1), at 8^3 {g8:.4e}; oracle agrees: {ok12}"),
    )
}

fn criterion_5() -> Verdict {
    let target = (2.0 * PI).sqrt();
    let start = Instant::now();
    // (a) analytic gradient quadrature over the cylinder
    let quad_errs: Vec<f64> = [0.3, 0.2, 0.14]
        .iter()
        .map(|&r| (gradient_energy(r, 0, 8, 400).cylinder[0] - 2.0 * PI).abs() / (2.0 * PI))
        .collect();
    let quad_ok = quad_errs.iter().all(|&e| e <= 0.01);

    let f = FieldPreset::SmoothRadial.build(cube()).unwrap();
    let x0 = [0.5; 3];
    let opts = VrStudyOptions::default();
    // (b, c) shrinking r on the 64^3 grid
    let rows = vr_convergence_study(&f, &x0, 0, &[0.3, 0.2, 0.14], &[64], &opts).map_err(|e| e.to_string())?;
    let norms: Vec<f64> = rows.iter().map(|r| r.l_norm).collect();
    let errs: Vec<f64> = norms.iter().map(|n| (n - target).abs()).collect();
    let at_02 = errs[1] / target;
    // (d) refining the grid at r = 0.2
    let ladder = vr_convergence_study(&f, &x0, 0, &[0.2], &[32, 48, 64], &opts).map_err(|e| e.to_string())?;
    let lad: Vec<f64> = ladder.iter().map(|r| r.l_norm).collect();
    let diffs = [(lad[1] - lad[0]).abs(), (lad[2] - lad[1]).abs()];
    let secs = start.elapsed().as_secs_f64();

    let ok = quad_ok && at_02 <= 0.2 && strictly_decreasing(&errs) && diffs[1] < diffs[0] && secs < 300.0;
    check(
        ok,
        format!(
            "quadrature rel err [{}]; 64^3 l_norm over r = 0.3, 0.2, 0.14: [{}] (r = 0.2 off by {:.1}%); \
             |l_norm - sqrt(2 pi)| [{}]; r = 0.2 over 32/48/64: [{}], diffs [{}]; {secs:.1} s",
            fmt_list(&quad_errs),
            fmt_list(&norms),
            100.0 * at_02,
            fmt_list(&errs),
            fmt_list(&lad),
            fmt_list(&diffs)
        ),
    )
}

fn criterion_6() -> Verdict {
    let f = FieldPreset::SmoothRadial.build(cube()).unwrap();
    let x0 = [0.5; 3];
    let opts = VrStudyOptions::default();
    let rows = vr_convergence_study(&f, &x0, 0, &[0.3, 0.2, 0.14], &[64], &opts).map_err(|e| e.to_string())?;
    let res: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let ladder = vr_convergence_study(&f, &x0, 0, &[0.2], &[48, 64], &opts).map_err(|e| e.to_string())?;
    let ex: Vec<f64> = ladder.iter().map(|r| r.excess()).collect();
    let slack_ok = (ex[0] <= 0.0 && ex[1] <= 0.0) || ex[1].max(0.0) < ex[0].max(0.0);
    check(
        strictly_decreasing(&res) && slack_ok,
        format!(
            "residual over r = 0.3, 0.2, 0.14: [{}]; bounds [{}]; residual^2 - bound at r = 0.2, 48^3/64^3: [{}]",
            fmt_list(&res),
            fmt_list(&rows.iter().map(|r| r.bound).collect::<Vec<_>>()),
            fmt_list(&ex)
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for (i, r) in [0.3f64, 0.2, 0.14].into_iter().enumerate() {
        let v = monte_carlo_volumes(r, 1_000_000, 17 + i as u64);
        let cyl = 2.0 * PI * r.powi(4);
        let cyl_err = (v.cylinder - cyl).abs() / cyl;
        let collar_bound = 2.0 * PI * r.powi(5) * (2.0 + r);
        let fd = max_fd_gradient(r, 0, 200_000, 29 + i as u64, 1e-3 * r * r) * r * r;
        ok &= cyl_err <= 0.01 && v.collar <= collar_bound && fd <= 1.05;
        notes.push(format!(
            "r = {r}: vol(C_r) err {:.2}%, vol(R_r \\ C_r) {:.3e} <= {:.3e}, max FD * r^2 = {fd:.4}",
            100.0 * cyl_err,
            v.collar,
            collar_bound
        ));
    }
    check(ok, notes.join("; "))
}

fn criterion_8() -> Verdict {
    let f = DiagonalTensorField::constant(cube(), vec![1.0, 2.0, 1.5]).unwrap();
    let e = 0.5 * 0.5f64.sqrt();
    let spec = BoxModeSpec { x0: [0.5 - e / 2.0, 0.5 - e / 2.0, 0.25], k1: 1.0, k2: 2.0, lambda: 1.5, h: 0.5, n: 1 };
    let rows = box_mode_study(&f, &spec, &cube(), &[8, 16, 32], DEFAULT_MIN_EDGE_CELLS, QuadratureKind::Gauss2)
        .map_err(|e| e.to_string())?;
    let res: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let ray: Vec<f64> = rows.iter().map(|r| r.rayleigh_error).collect();
    check(
        strictly_decreasing(&res) && strictly_decreasing(&ray),
        format!("8/16/32: residual [{}], |rayleigh - 1.5| [{}]", fmt_list(&res), fmt_list(&ray)),
    )
}

fn criterion_9() -> Verdict {
    let g = StructuredGrid::unit(3, 8).unwrap();
    let f = DiagonalTensorField::constant(cube(), vec![1.0, 2.0, 3.0]).unwrap();
    let (a, l) = pencil(&g, &f);
    let dense = dense_generalized_eig(&a, &l, false, &DenseOptions::default()).map_err(|e| e.to_string())?;
    let n = dense.eigenvalues.len();
    let mut worst = 0.0f64;
    let mut all_converged = true;
    for seed in [1, 2, 3] {
        for which in [Which::Smallest, Which::Largest] {
            let opts = LobpcgOptions { block: 5, which, seed, tol: 1e-8, ..Default::default() };
            let r = lobpcg(&a, &l, &opts).map_err(|e| e.to_string())?;
            all_converged &= r.converged;
            let expect = match which {
                Which::Smallest => &dense.eigenvalues[..5],
                Which::Largest => &dense.eigenvalues[n - 5..],
            };
            for (x, y) in r.eigenvalues.iter().zip(expect) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    check(
        worst <= 1e-6 && all_converged,
        format!("seeds 1, 2, 3 at both ends: max |lobpcg - dense| = {worst:.2e}, converged: {all_converged}"),
    )
}

fn spectrum_outputs(cells: usize, k: [f64; 3]) -> (String, Vec<u8>, String) {
    let g = StructuredGrid::unit(3, cells).unwrap();
    let f = DiagonalTensorField::constant(cube(), k.to_vec()).unwrap();
    let opts = SpectrumOptions { gap_interval: Some([1.0, 2.0]), ..Default::default() };
    let (rep, _) = run_spectrum(&g, &f, &opts).unwrap();
    let mut csv = Vec::new();
    write_eigenvalues_csv(&rep.eigenvalues, &mut csv).unwrap();
    let fill = interval_fill_check(&rep.eigenvalues, 1.0, 2.0, 0.1).unwrap();
    let mut fill_json = Vec::new();
    write_json(&fill, &mut fill_json).unwrap();
    (rep.to_json_without_timings().unwrap(), csv, String::from_utf8(fill_json).unwrap())
}

fn criterion_10() -> Verdict {
    let c1 = (spectrum_outputs(8, [1.0, 2.0, 3.0]), spectrum_outputs(8, [1.0, 2.0, 3.0]));
    let c4 = (spectrum_outputs(12, [1.0, 2.0, 1.0]), spectrum_outputs(12, [1.0, 2.0, 1.0]));
    let same1 = c1.0 == c1.1;
    let same4 = c4.0 == c4.1;
    check(
        same1 && same4,
        format!("criterion-1 outputs identical: {same1}, criterion-4 outputs identical: {same4}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("oracle anchor", criterion_1),
        ("identity pencil", criterion_2),
        ("hull inclusion", criterion_3),
        ("interval fill", criterion_4),
        ("v_r norm limit", criterion_5),
        ("v_r residual decay", criterion_6),
        ("volume and gradient bounds", criterion_7),
        ("box-mode residual decay", criterion_8),
        ("LOBPCG consistency", criterion_9),
        ("determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL  {name} ({secs:.1} s): {detail}");
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
