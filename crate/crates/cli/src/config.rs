//! Experiment configuration: TOML with dotted sections, unknown keys rejected,
//! every value checked before any computation starts.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use precond_spectrum::analysis::{SolverChoice, SpectrumOptions, VrStudyOptions, DEFAULT_TOL_INCL};
use precond_spectrum::assembly::QuadratureKind;
use precond_spectrum::coefficients::{
    AffineComponent, CoefficientBox, DiagonalTensorField, FieldKind, FieldPreset,
};
use precond_spectrum::constructions::{
    BoxModeSpec, DEFAULT_MIN_EDGE_CELLS, DEFAULT_RESOLVABILITY_FACTOR,
};
use precond_spectrum::eig::DEFAULT_DENSE_CAP;
use precond_spectrum::mesh::{BoxDomain, StructuredGrid};

/// A configuration problem, phrased with the offending key.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{key}: {msg}"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: DomainSection,
    pub grid: Option<GridSection>,
    pub field: FieldSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    pub fill: Option<FillSection>,
    pub vr: Option<VrSection>,
    pub box_mode: Option<BoxModeSection>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { lo: vec![0.0; 3], hi: vec![1.0; 3] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Signed so that negative entries are reported against this key.
    pub cells: Vec<i64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub preset: Option<String>,
    pub kind: Option<String>,
    pub values: Option<Vec<f64>>,
    pub slopes: Option<Vec<f64>>,
    pub coords: Option<Vec<i64>>,
    pub background: Option<Vec<f64>>,
    pub boxes: Option<Vec<BoxEntry>>,
    pub center: Option<Vec<f64>>,
    pub amplitude: Option<Vec<f64>>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxEntry {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_method")]
    pub method: String,
    pub cap: Option<i64>,
    pub block: Option<i64>,
    pub tol: Option<f64>,
    pub max_iter: Option<i64>,
    pub seed: Option<u64>,
    #[serde(default = "default_quadrature")]
    pub quadrature: String,
}

fn default_method() -> String {
    "dense".into()
}

fn default_quadrature() -> String {
    "gauss2".into()
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            method: default_method(),
            cap: None,
            block: None,
            tol: None,
            max_iter: None,
            seed: None,
            quadrature: default_quadrature(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub tol_incl: Option<f64>,
    pub oversample: Option<i64>,
    pub gap_interval: Option<[f64; 2]>,
    /// Also write `locality.csv` (needs eigenvectors, dense solver only).
    #[serde(default)]
    pub locality: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillSection {
    pub interval: [f64; 2],
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrSection {
    pub x0: Vec<f64>,
    pub axis: i64,
    pub r_list: Vec<f64>,
    pub cells_list: Vec<i64>,
    pub resolvability_factor: Option<f64>,
    pub bound_sampling: Option<i64>,
    #[serde(default, rename = "assert")]
    pub checks: VrAssert,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrAssert {
    /// On every grid, the residual strictly decreases along `r_list`.
    #[serde(default)]
    pub residual_decreasing: bool,
    /// Every row satisfies `residual^2 <= bound * (1 + slack)`.
    #[serde(default)]
    pub within_bound: bool,
    #[serde(default)]
    pub bound_slack: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxModeSection {
    pub x0: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub lambda: f64,
    pub h: f64,
    pub n: i64,
    pub cells_list: Vec<i64>,
    /// Region where `K` is constant; the whole domain when absent.
    pub constancy_lo: Option<Vec<f64>>,
    pub constancy_hi: Option<Vec<f64>>,
    pub min_edge_cells: Option<f64>,
    #[serde(default, rename = "assert")]
    pub checks: BoxAssert,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxAssert {
    #[serde(default)]
    pub residual_decreasing: bool,
    /// `residual / l_norm` strictly decreasing along the ladder.
    #[serde(default)]
    pub relative_residual_decreasing: bool,
    #[serde(default)]
    pub rayleigh_error_decreasing: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_oracle_tol")]
    pub tol: f64,
    /// Test hook: perturb the first stiffness entry by this relative amount.
    #[serde(default)]
    pub corrupt: f64,
}

fn default_oracle_tol() -> f64 {
    1e-10
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { tol: default_oracle_tol(), corrupt: 0.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// A parsed config together with the SHA-256 of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<LoadedConfig, ConfigError> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    let hash = Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(LoadedConfig { config, hash })
}

fn to_count(key: &str, v: i64, min: i64) -> Result<usize, ConfigError> {
    if v < min {
        return Err(bad(key, format!("must be at least {min}, got {v}")));
    }
    Ok(v as usize)
}

fn finite(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(bad(key, "values must be finite"));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(bad(key, format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn require<'a, T>(key: &str, v: &'a Option<T>) -> Result<&'a T, ConfigError> {
    v.as_ref().ok_or_else(|| bad(key, "required for this field kind"))
}

impl ExperimentConfig {
    pub fn domain(&self) -> Result<BoxDomain<f64>, ConfigError> {
        finite("domain.lo", &self.domain.lo)?;
        finite("domain.hi", &self.domain.hi)?;
        BoxDomain::new(self.domain.lo.clone(), self.domain.hi.clone()).map_err(|e| bad("domain", e))
    }

    pub fn dim(&self) -> usize {
        self.domain.lo.len()
    }

    pub fn grid(&self) -> Result<StructuredGrid<f64>, ConfigError> {
        let section = self.grid.as_ref().ok_or_else(|| bad("grid.cells", "missing"))?;
        let cells = section
            .cells
            .iter()
            .map(|&c| to_count("grid.cells", c, 1))
            .collect::<Result<Vec<_>, _>>()?;
        StructuredGrid::new(self.domain()?, &cells).map_err(|e| bad("grid.cells", e))
    }

    pub fn field(&self) -> Result<DiagonalTensorField<f64>, ConfigError> {
        let domain = self.domain()?;
        let f = &self.field;
        match (&f.preset, &f.kind) {
            (Some(_), Some(_)) => Err(bad("field", "give either preset or kind, not both")),
            (None, None) => Err(bad("field.kind", "missing (or set field.preset)")),
            (Some(name), None) => {
                let preset = FieldPreset::from_name(name).ok_or_else(|| {
                    let names: Vec<_> = FieldPreset::ALL.iter().map(|p| p.name()).collect();
                    bad("field.preset", format!("unknown preset {name:?}; expected one of {names:?}"))
                })?;
                preset.build(domain).map_err(|e| bad("field.preset", e))
            }
            (None, Some(kind)) => {
                let kind = self.field_kind(kind)?;
                DiagonalTensorField::new(domain, kind).map_err(|e| bad("field", e))
            }
        }
    }

    fn field_kind(&self, kind: &str) -> Result<FieldKind<f64>, ConfigError> {
        let f = &self.field;
        let d = self.dim();
        let vec_of = |key: &str, v: &Option<Vec<f64>>| -> Result<Vec<f64>, ConfigError> {
            let v = require(key, v)?;
            finite(key, v)?;
            if v.len() != d {
                return Err(bad(key, format!("expected {d} entries, got {}", v.len())));
            }
            Ok(v.clone())
        };
        Ok(match kind {
            "constant" => FieldKind::Constant(vec_of("field.values", &f.values)?),
            "axis-affine" => {
                let offsets = vec_of("field.values", &f.values)?;
                let slopes = vec_of("field.slopes", &f.slopes)?;
                let coords = require("field.coords", &f.coords)?;
                if coords.len() != d {
                    return Err(bad("field.coords", format!("expected {d} entries")));
                }
                let coords = coords
                    .iter()
                    .map(|&c| match to_count("field.coords", c, 0)? {
                        c if c < d => Ok(c),
                        c => Err(bad("field.coords", format!("axis {c} out of range"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                FieldKind::AxisAffine(
                    offsets
                        .into_iter()
                        .zip(slopes)
                        .zip(coords)
                        .map(|((offset, slope), coord)| AffineComponent { offset, slope, coord })
                        .collect(),
                )
            }
            "piecewise-constant" => {
                let background = vec_of("field.background", &f.background)?;
                let boxes = require("field.boxes", &f.boxes)?
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let key = format!("field.boxes[{i}]");
                        finite(&key, &b.values)?;
                        let region = BoxDomain::new(b.lo.clone(), b.hi.clone()).map_err(|e| bad(&key, e))?;
                        Ok(CoefficientBox { region, values: b.values.clone() })
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                FieldKind::PiecewiseConstant { background, boxes }
            }
            "smooth-radial" => FieldKind::SmoothRadial {
                base: vec_of("field.values", &f.values)?,
                amplitude: vec_of("field.amplitude", &f.amplitude)?,
                center: vec_of("field.center", &f.center)?,
                width: positive("field.width", *require("field.width", &f.width)?)?,
            },
            other => {
                return Err(bad(
                    "field.kind",
                    format!(
                        "unknown kind {other:?}; expected constant, axis-affine, piecewise-constant or smooth-radial"
                    ),
                ))
            }
        })
    }

    /// Constant diagonal values, for the oracle.
    pub fn constant_values(&self) -> Result<Vec<f64>, ConfigError> {
        match self.field()?.kind() {
            FieldKind::Constant(v) => Ok(v.clone()),
            other => Err(bad("field", format!("oracle-check needs a constant field, got {}", other.name()))),
        }
    }

    pub fn quadrature(&self) -> Result<QuadratureKind, ConfigError> {
        QuadratureKind::from_name(&self.solver.quadrature).ok_or_else(|| {
            bad("solver.quadrature", format!("unknown rule {:?}; expected gauss2 or centroid", self.solver.quadrature))
        })
    }

    pub fn dense_cap(&self) -> Result<usize, ConfigError> {
        self.solver.cap.map_or(Ok(DEFAULT_DENSE_CAP), |c| to_count("solver.cap", c, 1))
    }

    /// Solver seed after applying the command-line override.
    pub fn seed(&self, cli_seed: Option<u64>) -> u64 {
        cli_seed.or(self.solver.seed).unwrap_or(0)
    }

    pub fn solver(&self, seed: u64) -> Result<SolverChoice, ConfigError> {
        match self.solver.method.as_str() {
            "dense" => Ok(SolverChoice::Dense { cap: self.dense_cap()? }),
            "lobpcg" => Ok(SolverChoice::Lobpcg {
                block: self.solver.block.map_or(Ok(5), |b| to_count("solver.block", b, 1))?,
                tol: positive("solver.tol", self.solver.tol.unwrap_or(1e-8))?,
                max_iter: self.solver.max_iter.map_or(Ok(500), |m| to_count("solver.max_iter", m, 1))?,
                seed,
            }),
            other => Err(bad("solver.method", format!("unknown method {other:?}; expected dense or lobpcg"))),
        }
    }

    pub fn spectrum_options(&self, seed: u64) -> Result<SpectrumOptions, ConfigError> {
        let s = &self.spectrum;
        let tol_incl = s.tol_incl.unwrap_or(DEFAULT_TOL_INCL);
        if !(tol_incl >= 0.0 && tol_incl.is_finite()) {
            return Err(bad("spectrum.tol_incl", "must be non-negative"));
        }
        if let Some([a, b]) = s.gap_interval {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(bad("spectrum.gap_interval", "need finite a < b"));
            }
        }
        let solver = self.solver(seed)?;
        if s.locality && !matches!(solver, SolverChoice::Dense { .. }) {
            return Err(bad("spectrum.locality", "requires solver.method = \"dense\""));
        }
        Ok(SpectrumOptions {
            solver,
            quadrature: self.quadrature()?,
            oversample: s.oversample.map_or(Ok(2), |o| to_count("spectrum.oversample", o, 1))?,
            tol_incl,
            gap_interval: s.gap_interval,
            want_vectors: s.locality,
        })
    }

    pub fn fill(&self) -> Result<&FillSection, ConfigError> {
        let f = self.fill.as_ref().ok_or_else(|| bad("fill", "section missing"))?;
        let [a, b] = f.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(bad("fill.interval", "need finite a < b"));
        }
        positive("fill.delta", f.delta)?;
        Ok(f)
    }

    pub fn vr(&self) -> Result<VrPlan, ConfigError> {
        let v = self.vr.as_ref().ok_or_else(|| bad("vr", "section missing"))?;
        if self.dim() != 3 {
            return Err(bad("domain", "vr-study needs a 3D domain"));
        }
        finite("vr.x0", &v.x0)?;
        if v.x0.len() != 3 {
            return Err(bad("vr.x0", "expected 3 entries"));
        }
        let axis = to_count("vr.axis", v.axis, 0)?;
        if axis >= 3 {
            return Err(bad("vr.axis", format!("must be 0, 1 or 2, got {axis}")));
        }
        if v.r_list.is_empty() {
            return Err(bad("vr.r_list", "must not be empty"));
        }
        for &r in &v.r_list {
            positive("vr.r_list", r)?;
        }
        if v.cells_list.is_empty() {
            return Err(bad("vr.cells_list", "must not be empty"));
        }
        let cells = v
            .cells_list
            .iter()
            .map(|&c| to_count("vr.cells_list", c, 2))
            .collect::<Result<Vec<_>, _>>()?;
        let opts = VrStudyOptions {
            quadrature: self.quadrature()?,
            resolvability_factor: positive(
                "vr.resolvability_factor",
                v.resolvability_factor.unwrap_or(DEFAULT_RESOLVABILITY_FACTOR),
            )?,
            bound_sampling: v.bound_sampling.map_or(Ok(41), |s| to_count("vr.bound_sampling", s, 2))?,
        };
        if !(v.checks.bound_slack >= 0.0) {
            return Err(bad("vr.assert.bound_slack", "must be non-negative"));
        }
        Ok(VrPlan { x0: v.x0.clone(), axis, r_list: v.r_list.clone(), cells, opts, checks: v.checks.clone() })
    }

    pub fn box_mode(&self) -> Result<BoxPlan, ConfigError> {
        let b = self.box_mode.as_ref().ok_or_else(|| bad("box_mode", "section missing"))?;
        if self.dim() != 3 {
            return Err(bad("domain", "box-mode needs a 3D domain"));
        }
        finite("box_mode.x0", &b.x0)?;
        if b.x0.len() != 3 {
            return Err(bad("box_mode.x0", "expected 3 entries"));
        }
        let n = u32::try_from(b.n).ok().filter(|&n| n >= 1).ok_or_else(|| bad("box_mode.n", "must be a positive integer"))?;
        let spec = BoxModeSpec {
            x0: [b.x0[0], b.x0[1], b.x0[2]],
            k1: b.k1,
            k2: b.k2,
            lambda: b.lambda,
            h: b.h,
            n,
        };
        spec.validate().map_err(|e| bad("box_mode", e))?;
        if b.cells_list.is_empty() {
            return Err(bad("box_mode.cells_list", "must not be empty"));
        }
        let cells = b
            .cells_list
            .iter()
            .map(|&c| to_count("box_mode.cells_list", c, 2))
            .collect::<Result<Vec<_>, _>>()?;
        let constancy = match (&b.constancy_lo, &b.constancy_hi) {
            (None, None) => self.domain()?,
            (Some(lo), Some(hi)) => {
                BoxDomain::new(lo.clone(), hi.clone()).map_err(|e| bad("box_mode.constancy_lo", e))?
            }
            _ => return Err(bad("box_mode.constancy_lo", "give both constancy_lo and constancy_hi")),
        };
        Ok(BoxPlan {
            spec,
            cells,
            constancy,
            min_edge_cells: positive("box_mode.min_edge_cells", b.min_edge_cells.unwrap_or(DEFAULT_MIN_EDGE_CELLS))?,
            checks: b.checks.clone(),
        })
    }

    pub fn oracle_tol(&self) -> Result<f64, ConfigError> {
        positive("oracle.tol", self.oracle.tol)
    }
}

#[derive(Debug)]
pub struct VrPlan {
    pub x0: Vec<f64>,
    pub axis: usize,
    pub r_list: Vec<f64>,
    pub cells: Vec<usize>,
    pub opts: VrStudyOptions,
    pub checks: VrAssert,
}

#[derive(Debug)]
pub struct BoxPlan {
    pub spec: BoxModeSpec,
    pub cells: Vec<usize>,
    pub constancy: BoxDomain<f64>,
    pub min_edge_cells: f64,
    pub checks: BoxAssert,
}
