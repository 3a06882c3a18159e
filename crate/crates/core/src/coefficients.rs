//! Diagonal coefficient tensors `K(x) = diag(k_1(x), ..., k_d(x))` and the
//! interval spanned by their component ranges.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{BoxDomain, StructuredGrid, MAX_DIM};
use crate::scalar::Real;

/// `k(x) = offset + slope * x[coord]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineComponent<T> {
    pub offset: T,
    pub slope: T,
    pub coord: usize,
}

/// A closed axis-aligned box carrying constant diagonal values.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBox<T> {
    pub region: BoxDomain<T>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind<T> {
    Constant(Vec<T>),
    AxisAffine(Vec<AffineComponent<T>>),
    /// The first listed box containing a point wins, faces included.
    PiecewiseConstant {
        background: Vec<T>,
        boxes: Vec<CoefficientBox<T>>,
    },
    /// `k_i(x) = base_i + amplitude_i * exp(-|x - center|^2 / width^2)`.
    SmoothRadial {
        base: Vec<T>,
        amplitude: Vec<T>,
        center: Vec<T>,
        width: T,
    },
}

impl<T> FieldKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Constant(_) => "constant",
            FieldKind::AxisAffine(_) => "axis-affine",
            FieldKind::PiecewiseConstant { .. } => "piecewise-constant",
            FieldKind::SmoothRadial { .. } => "smooth-radial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalTensorField<T> {
    domain: BoxDomain<T>,
    kind: FieldKind<T>,
}

/// Lattice points per axis used for the ellipticity check.
const ELLIPTICITY_SAMPLES: usize = 9;

impl<T: Real> DiagonalTensorField<T> {
    pub fn new(domain: BoxDomain<T>, kind: FieldKind<T>) -> Result<Self> {
        let d = domain.dim();
        let need = |what: &str, len: usize| -> Result<()> {
            if len == d {
                Ok(())
            } else {
                Err(Error::InvalidField(format!("{what} has {len} entries, domain dimension is {d}")))
            }
        };
        let finite = |what: &str, v: &[T]| -> Result<()> {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::InvalidField(format!("{what} contains non-finite entries")))
            }
        };
        match &kind {
            FieldKind::Constant(v) => {
                need("values", v.len())?;
                finite("values", v)?;
            }
            FieldKind::AxisAffine(c) => {
                need("affine components", c.len())?;
                for (i, comp) in c.iter().enumerate() {
                    if comp.coord >= d {
                        return Err(Error::InvalidField(format!(
                            "component {i} depends on coordinate {} of a {d}-dimensional domain",
                            comp.coord
                        )));
                    }
                    finite("affine coefficients", &[comp.offset, comp.slope])?;
                }
            }
            FieldKind::PiecewiseConstant { background, boxes } => {
                need("background", background.len())?;
                finite("background", background)?;
                for b in boxes {
                    need("box values", b.values.len())?;
                    need("box corners", b.region.dim())?;
                    finite("box values", &b.values)?;
                }
            }
            FieldKind::SmoothRadial { base, amplitude, center, width } => {
                need("values", base.len())?;
                need("amplitude", amplitude.len())?;
                need("center", center.len())?;
                finite("values", base)?;
                finite("amplitude", amplitude)?;
                finite("center", center)?;
                if !(width.is_finite() && *width > T::zero()) {
                    return Err(Error::InvalidField(format!("width must be positive, got {width}")));
                }
            }
        }
        let field = Self { domain, kind };
        field.check_ellipticity()?;
        Ok(field)
    }

    pub fn constant(domain: BoxDomain<T>, values: Vec<T>) -> Result<Self> {
        Self::new(domain, FieldKind::Constant(values))
    }

    /// `K = I`.
    pub fn identity(domain: BoxDomain<T>) -> Result<Self> {
        let d = domain.dim();
        Self::constant(domain, vec![T::one(); d])
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain<T> {
        &self.domain
    }

    pub fn kind(&self) -> &FieldKind<T> {
        &self.kind
    }

    /// The same field multiplied by `factor > 0`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        let s = |v: &[T]| v.iter().map(|&x| x * factor).collect::<Vec<_>>();
        let kind = match &self.kind {
            FieldKind::Constant(v) => FieldKind::Constant(s(v)),
            FieldKind::AxisAffine(c) => FieldKind::AxisAffine(
                c.iter()
                    .map(|a| AffineComponent {
                        offset: a.offset * factor,
                        slope: a.slope * factor,
                        coord: a.coord,
                    })
                    .collect(),
            ),
            FieldKind::PiecewiseConstant { background, boxes } => FieldKind::PiecewiseConstant {
                background: s(background),
                boxes: boxes
                    .iter()
                    .map(|b| CoefficientBox { region: b.region.clone(), values: s(&b.values) })
                    .collect(),
            },
            FieldKind::SmoothRadial { base, amplitude, center, width } => FieldKind::SmoothRadial {
                base: s(base),
                amplitude: s(amplitude),
                center: center.clone(),
                width: *width,
            },
        };
        Self::new(self.domain.clone(), kind)
    }

    fn check_ellipticity(&self) -> Result<()> {
        let d = self.dim();
        let mut out = [T::zero(); MAX_DIM];
        let mut check = |x: &[T]| -> Result<()> {
            self.eval_into(x, &mut out[..d]);
            for (i, &v) in out[..d].iter().enumerate() {
                if !(v > T::zero()) || !v.is_finite() {
                    return Err(Error::NotElliptic {
                        component: i,
                        value: v.as_f64(),
                        point: x.iter().map(|c| c.as_f64()).collect(),
                    });
                }
            }
            Ok(())
        };
        let lattice =
            StructuredGrid::new(self.domain.clone(), &vec![ELLIPTICITY_SAMPLES - 1; d])?;
        let mut result = Ok(());
        lattice.for_each_node(|x| {
            if result.is_ok() {
                result = check(x);
            }
        });
        result?;
        if let FieldKind::PiecewiseConstant { boxes, .. } = &self.kind {
            for b in boxes.iter().filter(|b| b.region.overlaps(&self.domain)) {
                if let Some((i, v)) = b.values.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
                    return Err(Error::NotElliptic {
                        component: i,
                        value: v.as_f64(),
                        point: b.region.center().iter().map(|c| c.as_f64()).collect(),
                    });
                }
            }
        }
        Ok(())
    }

    fn inside_domain(&self, x: &[T]) -> bool {
        // Lattice nodes on the far faces are computed as lo + n*h and may overshoot hi
        // by a few ulps.
        let slack = T::lit(64.0) * T::epsilon();
        x.len() == self.dim()
            && (0..self.dim()).all(|k| {
                let tol = slack * self.domain.extent(k).max(T::one());
                x[k] >= self.domain.lo()[k] - tol && x[k] <= self.domain.hi()[k] + tol
            })
    }

    /// `(k_1(x), ..., k_d(x))` for `x` in the closed domain.
    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.inside_domain(x) {
            return Err(Error::PointOutsideDomain { point: x.iter().map(|c| c.as_f64()).collect() });
        }
        let mut out = vec![T::zero(); self.dim()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into `out[..d]`; `x` must lie in the domain.
    #[inline]
    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        match &self.kind {
            FieldKind::Constant(v) => out.copy_from_slice(v),
            FieldKind::AxisAffine(c) => {
                for (o, a) in out.iter_mut().zip(c) {
                    *o = a.offset + a.slope * x[a.coord];
                }
            }
            FieldKind::PiecewiseConstant { background, boxes } => {
                let v = boxes
                    .iter()
                    .find(|b| b.region.contains(x))
                    .map_or(background.as_slice(), |b| b.values.as_slice());
                out.copy_from_slice(v);
            }
            FieldKind::SmoothRadial { base, amplitude, center, width } => {
                let r2: T = x.iter().zip(center).map(|(&a, &c)| (a - c) * (a - c)).sum();
                let g = (-r2 / (*width * *width)).exp();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = base[i] + amplitude[i] * g;
                }
            }
        }
    }

    /// Component `i` of `K(x)`, unchecked.
    #[inline]
    pub fn component(&self, i: usize, x: &[T]) -> T {
        let mut out = [T::zero(); MAX_DIM];
        self.eval_into(x, &mut out[..self.dim()]);
        out[i]
    }

    /// True when the field is constant on the whole domain.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            FieldKind::Constant(_) => true,
            FieldKind::AxisAffine(c) => c.iter().all(|a| a.slope == T::zero()),
            FieldKind::PiecewiseConstant { background, boxes } => {
                boxes.iter().all(|b| &b.values == background || !b.region.overlaps(&self.domain))
            }
            FieldKind::SmoothRadial { amplitude, .. } => amplitude.iter().all(|a| *a == T::zero()),
        }
    }

    pub fn descriptor(&self) -> FieldDescriptor {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        let mut desc = FieldDescriptor { kind: self.kind.name().to_string(), ..Default::default() };
        match &self.kind {
            FieldKind::Constant(v) => desc.values = Some(f(v)),
            FieldKind::AxisAffine(c) => {
                desc.values = Some(c.iter().map(|a| a.offset.as_f64()).collect());
                desc.slopes = Some(c.iter().map(|a| a.slope.as_f64()).collect());
                desc.coords = Some(c.iter().map(|a| a.coord).collect());
            }
            FieldKind::PiecewiseConstant { background, boxes } => {
                desc.background = Some(f(background));
                desc.boxes = Some(
                    boxes
                        .iter()
                        .map(|b| BoxDescriptor {
                            lo: f(b.region.lo()),
                            hi: f(b.region.hi()),
                            values: f(&b.values),
                        })
                        .collect(),
                );
            }
            FieldKind::SmoothRadial { base, amplitude, center, width } => {
                desc.values = Some(f(base));
                desc.amplitude = Some(f(amplitude));
                desc.center = Some(f(center));
                desc.width = Some(width.as_f64());
            }
        }
        desc
    }
}

/// Plain description of a field for reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FieldDescriptor {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoxDescriptor>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDescriptor {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub values: Vec<f64>,
}

/// Closed interval `[lo, hi]` containing every sampled coefficient value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HullEstimate {
    pub lo: f64,
    pub hi: f64,
    pub samples_used: usize,
}

impl HullEstimate {
    pub fn empty() -> Self {
        Self { lo: f64::INFINITY, hi: f64::NEG_INFINITY, samples_used: 0 }
    }

    pub fn include(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }

    pub fn merge(&self, other: &HullEstimate) -> HullEstimate {
        HullEstimate {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            samples_used: self.samples_used + other.samples_used,
        }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Estimates `[min_i inf k_i, max_i sup k_i]` over the closed domain.
///
/// Samples every node of `grid`, every cell centroid, and the nodes of the
/// lattices refined by `2..=oversample`. All refinement levels up to
/// `oversample` are scanned, so the estimate never shrinks as `oversample`
/// grows. Box values of a piecewise-constant field are included exactly.
pub fn estimate_hull<T: Real>(
    field: &DiagonalTensorField<T>,
    grid: &StructuredGrid<T>,
    oversample: usize,
) -> HullEstimate {
    let d = field.dim();
    let mut hull = HullEstimate::empty();
    let mut k = [T::zero(); MAX_DIM];
    let mut sample = |x: &[T], hull: &mut HullEstimate| {
        field.eval_into(x, &mut k[..d]);
        for v in &k[..d] {
            hull.include(v.as_f64());
        }
        hull.samples_used += 1;
    };

    for m in 1..=oversample.max(1) {
        let lattice = if m == 1 { grid.clone() } else { grid.refined(m).expect("refined grid valid") };
        lattice.for_each_node(|x| sample(x, &mut hull));
    }

    let half = T::lit(0.5);
    let mut x = vec![T::zero(); d];
    for c in 0..grid.cell_count() {
        let o = grid.cell_origin(c);
        for a in 0..d {
            x[a] = grid.coordinate(a, o[a]) + half * grid.spacing()[a];
        }
        sample(&x, &mut hull);
    }

    if let FieldKind::PiecewiseConstant { boxes, .. } = field.kind() {
        for b in boxes.iter().filter(|b| b.region.overlaps(field.domain())) {
            for v in &b.values {
                hull.include(v.as_f64());
            }
            hull.samples_used += 1;
        }
    }
    hull
}

/// Built-in coefficient families used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldPreset {
    /// `K = 2 I`.
    ConstantIsotropic,
    /// `K = diag(1, 2, 3)`.
    ConstantAnisotropic,
    /// `k_i(x) = 1 + x_1` for every component.
    AxisAffine,
    /// Background `I`, the box `[1/4, 3/4]^d` carries `4 I`.
    PiecewiseInclusion,
    /// Gaussian bump with anisotropic base values.
    SmoothRadial,
}

impl FieldPreset {
    pub const ALL: [FieldPreset; 5] = [
        FieldPreset::ConstantIsotropic,
        FieldPreset::ConstantAnisotropic,
        FieldPreset::AxisAffine,
        FieldPreset::PiecewiseInclusion,
        FieldPreset::SmoothRadial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldPreset::ConstantIsotropic => "constant-isotropic",
            FieldPreset::ConstantAnisotropic => "constant-anisotropic",
            FieldPreset::AxisAffine => "axis-affine",
            FieldPreset::PiecewiseInclusion => "piecewise-inclusion",
            FieldPreset::SmoothRadial => "smooth-radial",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Instantiates the preset on `domain`; coordinates refer to the unit cube layout.
    pub fn build<T: Real>(self, domain: BoxDomain<T>) -> Result<DiagonalTensorField<T>> {
        let d = domain.dim();
        let take = |v: &[f64]| v[..d].iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let kind = match self {
            FieldPreset::ConstantIsotropic => FieldKind::Constant(take(&[2.0; 3])),
            FieldPreset::ConstantAnisotropic => FieldKind::Constant(take(&[1.0, 2.0, 3.0])),
            FieldPreset::AxisAffine => FieldKind::AxisAffine(
                (0..d)
                    .map(|_| AffineComponent { offset: T::one(), slope: T::one(), coord: 0 })
                    .collect(),
            ),
            FieldPreset::PiecewiseInclusion => FieldKind::PiecewiseConstant {
                background: take(&[1.0; 3]),
                boxes: vec![CoefficientBox {
                    region: BoxDomain::new(take(&[0.25; 3]), take(&[0.75; 3]))?,
                    values: take(&[4.0; 3]),
                }],
            },
            FieldPreset::SmoothRadial => FieldKind::SmoothRadial {
                base: take(&[1.0, 1.5, 2.0]),
                amplitude: take(&[1.0, 0.5, -0.5]),
                center: take(&[0.45, 0.5, 0.55]),
                width: T::lit(0.3),
            },
        };
        DiagonalTensorField::new(domain, kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube() -> BoxDomain<f64> {
        BoxDomain::unit(3).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = DiagonalTensorField::constant(cube(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.eval(&[0.3, 0.1, 0.9]).unwrap(), vec![1.0, 2.0, 3.0]);

        let f = FieldPreset::AxisAffine.build(cube()).unwrap();
        assert_eq!(f.eval(&[0.5, 0.0, 0.0]).unwrap(), vec![1.5, 1.5, 1.5]);

        let f = FieldPreset::PiecewiseInclusion.build(cube()).unwrap();
        assert_eq!(f.eval(&[0.5, 0.5, 0.5]).unwrap(), vec![4.0, 4.0, 4.0]);
        assert_eq!(f.eval(&[0.1, 0.5, 0.5]).unwrap(), vec![1.0, 1.0, 1.0]);
        // faces belong to the box
        assert_eq!(f.eval(&[0.25, 0.5, 0.75]).unwrap(), vec![4.0, 4.0, 4.0]);
    }

    #[test]
    fn first_listed_box_wins() {
        let b = |lo: f64, hi: f64, v: f64| CoefficientBox {
            region: BoxDomain::new(vec![lo; 2], vec![hi; 2]).unwrap(),
            values: vec![v; 2],
        };
        let f = DiagonalTensorField::new(
            BoxDomain::unit(2).unwrap(),
            FieldKind::PiecewiseConstant {
                background: vec![1.0, 1.0],
                boxes: vec![b(0.0, 0.5, 2.0), b(0.5, 1.0, 3.0)],
            },
        )
        .unwrap();
        assert_eq!(f.eval(&[0.5, 0.5]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(f.eval(&[0.6, 0.6]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn eval_rejects_outside_points() {
        let f = FieldPreset::ConstantAnisotropic.build(cube()).unwrap();
        assert!(matches!(f.eval(&[1.5, 0.5, 0.5]), Err(Error::PointOutsideDomain { .. })));
        assert!(matches!(f.eval(&[0.5, 0.5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn construction_rejects_non_elliptic_fields() {
        let err = DiagonalTensorField::constant(cube(), vec![1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotElliptic { component: 1, .. }));
        let err = DiagonalTensorField::new(
            cube(),
            FieldKind::AxisAffine(vec![
                AffineComponent { offset: 1.0, slope: 0.0, coord: 0 },
                AffineComponent { offset: 0.5, slope: -1.0, coord: 2 },
                AffineComponent { offset: 1.0, slope: 0.0, coord: 0 },
            ]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotElliptic { component: 1, .. }));
        assert!(DiagonalTensorField::constant(cube(), vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn hull_examples() {
        let g = StructuredGrid::unit(3, 4).unwrap();
        let f = FieldPreset::ConstantAnisotropic.build(cube()).unwrap();
        let h = estimate_hull(&f, &g, 1);
        assert_eq!((h.lo, h.hi), (1.0, 3.0));

        let f = FieldPreset::AxisAffine.build(cube()).unwrap();
        let h = estimate_hull(&f, &g, 2);
        assert_eq!((h.lo, h.hi), (1.0, 2.0));

        let f = FieldPreset::PiecewiseInclusion.build(cube()).unwrap();
        let h = estimate_hull(&f, &g, 1);
        assert_eq!((h.lo, h.hi), (1.0, 4.0));
    }

    #[test]
    fn hull_includes_boxes_missed_by_lattice() {
        // A thin box between lattice planes is invisible to sampling.
        let f = DiagonalTensorField::new(
            BoxDomain::unit(2).unwrap(),
            FieldKind::PiecewiseConstant {
                background: vec![1.0, 1.0],
                boxes: vec![CoefficientBox {
                    region: BoxDomain::new(vec![0.51, 0.51], vec![0.52, 0.52]).unwrap(),
                    values: vec![5.0, 0.5],
                }],
            },
        )
        .unwrap();
        let g = StructuredGrid::unit(2, 4).unwrap();
        let h = estimate_hull(&f, &g, 1);
        assert_eq!((h.lo, h.hi), (0.5, 5.0));
    }

    #[test]
    fn radial_hull_approaches_peak() {
        let f = FieldPreset::SmoothRadial.build(cube()).unwrap();
        let g = StructuredGrid::unit(3, 4).unwrap();
        let coarse = estimate_hull(&f, &g, 1);
        let fine = estimate_hull(&f, &g, 5);
        // component 1 peaks at 2.0 at the bump center
        assert!(fine.hi >= coarse.hi && fine.lo <= coarse.lo);
        assert!(fine.hi <= 2.0 + 1e-15);
        assert!(2.0 - fine.hi < 1e-2);
    }

    #[test]
    fn scaling_and_constancy() {
        let f = FieldPreset::SmoothRadial.build(cube()).unwrap();
        let g = f.scaled(2.0).unwrap();
        let x = [0.3, 0.4, 0.5];
        let a = f.eval(&x).unwrap();
        let b = g.eval(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(2.0 * u, *v);
        }
        assert!(!f.is_constant());
        assert!(FieldPreset::ConstantIsotropic.build(cube()).unwrap().is_constant());
    }

    proptest! {
        #[test]
        fn hull_monotone_in_oversample(m in 1usize..4, n in 2usize..5, preset in 0usize..5) {
            let f = FieldPreset::ALL[preset].build(cube()).unwrap();
            let g = StructuredGrid::unit(3, n).unwrap();
            let a = estimate_hull(&f, &g, m);
            let b = estimate_hull(&f, &g, m + 1);
            prop_assert!(b.lo <= a.lo && b.hi >= a.hi);
        }

        #[test]
        fn affine_hull_inside_true_hull(m in 1usize..4, n in 2usize..6) {
            let f = DiagonalTensorField::new(cube(), FieldKind::AxisAffine(vec![
                AffineComponent { offset: 1.0, slope: 0.7, coord: 0 },
                AffineComponent { offset: 2.0, slope: -0.5, coord: 1 },
                AffineComponent { offset: 1.2, slope: 0.3, coord: 2 },
            ])).unwrap();
            let h = estimate_hull(&f, &StructuredGrid::unit(3, n).unwrap(), m);
            prop_assert!(h.lo >= 1.0 && h.hi <= 2.0);
            prop_assert!(h.lo <= h.hi);
        }
    }
}
