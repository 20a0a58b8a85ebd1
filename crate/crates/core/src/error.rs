use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("subdivision count must be at least 1 ({0})")]
    ZeroSubdivisions(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported element type ({nodes} nodes per element, expected 20)")]
    UnsupportedElementType { line: usize, nodes: usize },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("unknown node set `{0}`")]
    UnknownNodeSet(String),
    #[error("unknown side set `{0}`")]
    UnknownSideSet(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum MaterialError {
    #[error("barrier violation: J = {j:e} is not positive")]
    BarrierViolation { j: f64 },
    #[error("non-finite material evaluation")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum ElementError {
    #[error("unsupported quadrature order: {0} points per axis")]
    UnsupportedQuadrature(usize),
    #[error("inverted element{}: det(G) = {det_g:e}", fmt_elem(*.element))]
    InvertedReference { element: Option<usize>, det_g: f64 },
    #[error("barrier violation in element {element} at quadrature point {qp}: J = {j:e}")]
    BarrierViolation { element: usize, qp: usize, j: f64 },
    #[error("non-finite response in element {element} at quadrature point {qp}")]
    NonFinite { element: usize, qp: usize },
}

fn fmt_elem(e: Option<usize>) -> String {
    e.map(|e| format!(" {e}")).unwrap_or_default()
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinearSolveError {
    #[error("matrix is singular: zero pivot at dof {dof} (pivot {pivot:e})")]
    Singular { dof: usize, pivot: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, rhs has {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("non-finite residual")]
    NonFinite,
    #[error("invalid problem definition: {0}")]
    Setup(String),
}

impl SolverError {
    /// Failures that a smaller load increment may cure.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            SolverError::Element(ElementError::BarrierViolation { .. })
                | SolverError::Element(ElementError::NonFinite { .. })
                | SolverError::NonConvergence { .. }
                | SolverError::NonFinite
                | SolverError::Linear(LinearSolveError::Singular { .. })
        )
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum PostError {
    #[error("stress tensor is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("probe point {0:?} lies outside the mesh")]
    ProbeOutsideMesh([f64; 3]),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
