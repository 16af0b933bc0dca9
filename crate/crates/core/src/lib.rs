//! Lowest-order nonlinear discontinuous Petrov-Galerkin method for
//! quasilinear elliptic problems `-div sigma(grad u) = f` with homogeneous
//! Dirichlet data on polygonal domains in the plane.

pub mod assembly;
pub mod config;
pub mod driver;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod mesh;
pub mod nonlinearity;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
