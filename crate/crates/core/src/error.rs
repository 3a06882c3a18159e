use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}: expected 1, 2 or 3")]
    UnsupportedDimension(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("axis {axis}: cell count {cells} leaves no interior node (need at least 2)")]
    TooFewCells { axis: usize, cells: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point {point:?} lies outside the domain")]
    PointOutsideDomain { point: Vec<f64> },

    #[error("coefficient is not uniformly positive: component {component} = {value} at {point:?}")]
    NotElliptic { component: usize, value: f64, point: Vec<f64> },

    #[error("invalid coefficient field: {0}")]
    InvalidField(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is indefinite: non-positive curvature {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("matrix is not positive definite: pivot {index} is {value:e}")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("order {n} exceeds the dense solver cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("tridiagonal QL iteration did not converge within {budget} sweeps")]
    QlNoConvergence { budget: usize },

    #[error("block size {block} is invalid for order {n}")]
    InvalidBlock { block: usize, n: usize },

    #[error("Rayleigh quotient of a zero vector")]
    ZeroVector,

    #[error("eigenvectors were not computed")]
    MissingEigenvectors,

    #[error("probe precondition violated: {0}")]
    Probe(String),

    #[error("resolvability rule violated: collar width r^2 = {collar:e} is below {factor} x max spacing {spacing:e}")]
    Resolvability { collar: f64, factor: f64, spacing: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The inputs violate a documented precondition.
    Input,
    /// A numerical routine failed on valid inputs.
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::UnsupportedDimension(_)
            | Error::InvalidDomain(_)
            | Error::TooFewCells { .. }
            | Error::IndexOutOfRange { .. }
            | Error::PointOutsideDomain { .. }
            | Error::NotElliptic { .. }
            | Error::InvalidField(_)
            | Error::DimensionMismatch { .. }
            | Error::DenseCapExceeded { .. }
            | Error::InvalidBlock { .. }
            | Error::ZeroVector
            | Error::MissingEigenvectors
            | Error::Probe(_)
            | Error::Resolvability { .. }
            | Error::InvalidArgument(_) => ErrorClass::Input,
            Error::NotConverged { .. }
            | Error::Indefinite { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::QlNoConvergence { .. } => ErrorClass::Numerical,
            Error::Io(_) | Error::Json(_) => ErrorClass::Io,
        }
    }
}
