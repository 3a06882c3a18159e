//! Generalized spectra of Laplacian-preconditioned diffusion operators.
//!
//! Assembles Q1 finite element discretizations of `-div(K grad u)` and
//! `-Laplace u` on structured box grids with homogeneous Dirichlet data, solves
//! the pencil `A x = lambda L x`, and probes how the spectrum relates to the
//! range of the diagonal coefficient `K`.
//!
//! Core numerics are generic over [`Real`]; the experiment layer
//! ([`constructions`], [`analysis`]) works in `f64`.

pub mod analysis;
pub mod assembly;
pub mod coefficients;
pub mod constructions;
pub mod eig;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod scalar;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;

pub type BoxDomainF64 = mesh::BoxDomain<f64>;
pub type GridF64 = mesh::StructuredGrid<f64>;
pub type FieldF64 = coefficients::DiagonalTensorField<f64>;
pub type CsrF64 = linalg::CsrMatrix<f64>;
pub type DenseF64 = linalg::DenseMatrix<f64>;
pub type EigenResultF64 = eig::EigenResult<f64>;

pub type GridF32 = mesh::StructuredGrid<f32>;
pub type FieldF32 = coefficients::DiagonalTensorField<f32>;
pub type CsrF32 = linalg::CsrMatrix<f32>;
