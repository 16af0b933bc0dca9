use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("triangle {triangle} references a vertex out of range")]
    VertexOutOfRange { triangle: usize },
    #[error("triangle {triangle} has non-positive area {area}")]
    NonPositiveArea { triangle: usize, area: f64 },
    #[error("edge ({a}, {b}) is shared by more than two triangles")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("vertex {vertex} is a hanging node on edge {edge}")]
    HangingNode { vertex: usize, edge: usize },
    #[error("edge {edge} has an inconsistent orientation")]
    Orientation { edge: usize },
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("inconsistent mesh data: {0}")]
    Inconsistent(String),
    #[error("meshes are not in a refinement relation: {0}")]
    NotARefinement(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown model '{0}' (expected example-a, example-b or linear:<w>)")]
    UnknownModel(String),
    #[error("linear model weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("energy density requires t >= 0, got {0}")]
    NegativeArgument(f64),
    #[error("closed-form energy density deviates from quadrature at t = {t}: {closed} vs {quadrature}")]
    DensityMismatch { t: f64, closed: f64, quadrature: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve reached relative residual {residual:e} > {tolerance:e}")]
    Inaccurate { residual: f64, tolerance: f64 },
    #[error("eigenvalue iteration did not converge (relative residual {residual:e})")]
    EigenNotConverged { residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("problem too large for the dense path: {ndof} > {limit}")]
    TooLarge { ndof: usize, limit: usize },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {msg}")]
    Value { key: String, msg: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("Newton iteration failed at level {level}: {source}")]
    Newton {
        level: usize,
        #[source]
        source: LinalgError,
    },
    #[error("Newton iteration did not converge at level {level}: dual norm {dual_norm:e} after {iterations} iterations")]
    NewtonNotConverged { level: usize, iterations: usize, dual_norm: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
