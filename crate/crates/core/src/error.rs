use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid edge ({parent} -> {child}): {reason}")]
    InvalidEdge {
        parent: usize,
        child: usize,
        reason: String,
    },

    #[error("duplicate edge ({parent} -> {child})")]
    DuplicateEdge { parent: usize, child: usize },

    #[error("graph needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("leader matrix has eigenvalue {re} {sign} {im_abs}i off the imaginary axis (Assumption 1)", sign = if *im >= 0.0 { "+" } else { "-" }, im_abs = im.abs())]
    AssumptionViolated { re: f64, im: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("mass matrix is numerically singular (det = {det:e})")]
    SingularMass { det: f64 },

    #[error("degenerate range [{lo}, {hi}] on dimension {dim}")]
    DegenerateRange { dim: usize, lo: f64, hi: f64 },

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("no weight samples inside window [{t_a}, {t_b}]")]
    EmptyWindow { t_a: f64, t_b: f64 },

    #[error("numerical blow-up at t = {t} s (agent {agent})")]
    NumericalBlowup { t: f64, agent: usize },

    #[error("torque cap exceeded at t = {t} s (agent {agent}): |tau| = {magnitude} > {cap}")]
    TorqueCapExceeded {
        t: f64,
        agent: usize,
        magnitude: f64,
        cap: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed [{rule}]: {detail}")]
    Validation { rule: String, detail: String },

    #[error("log is empty")]
    EmptyLog,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(rule: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Validation {
            rule: rule.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidEdge { .. } => "invalid_edge",
            Error::DuplicateEdge { .. } => "duplicate_edge",
            Error::TooFewNodes { .. } => "too_few_nodes",
            Error::NotSquare { .. } => "not_square",
            Error::AssumptionViolated { .. } => "assumption_violated",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SingularMass { .. } => "singular_mass",
            Error::DegenerateRange { .. } => "degenerate_range",
            Error::InvalidLattice(_) => "invalid_lattice",
            Error::EmptyWindow { .. } => "empty_window",
            Error::NumericalBlowup { .. } => "numerical_blowup",
            Error::TorqueCapExceeded { .. } => "torque_cap_exceeded",
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::EmptyLog => "empty_log",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
