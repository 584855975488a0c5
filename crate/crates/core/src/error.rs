use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by grid operations, kernels, diagnostics and scenario handling.
#[derive(Debug, Error)]
pub enum FlockError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error("periodized kernel is singular at x = {x} (x is a multiple of the period)")]
    SingularPoint { x: f64 },

    #[error("degenerate normalization: phi*rho = {value} at grid index {index}")]
    DegenerateNormalization { index: usize, value: f64 },

    #[error("kernel {0} is not supported by this operation")]
    UnsupportedKernel(String),

    #[error("mollifier width {width} is under-resolved (needs at least {minimum})")]
    UnderResolved { width: f64, minimum: f64 },

    #[error("support is empty at threshold {threshold}")]
    DegenerateSupport { threshold: f64 },

    #[error("vacuum: min rho = {min_rho}")]
    Vacuum { min_rho: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fit domain error: value {value} at t = {t} is not strictly positive")]
    FitDomain { t: f64, value: f64 },

    #[error("insufficient data: {found} samples in window, need at least {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("scenario rejected:\n{}", format_issues(.0))]
    Scenario(Vec<ScenarioIssue>),

    #[error("I/O failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A single validation problem found while parsing a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioIssue {
    /// 1-based line number, or `None` when the problem is a missing key.
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn format_issues(issues: &[ScenarioIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, FlockError>;

impl FlockError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FlockError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FlockError::Io {
            path: path.into(),
            source,
        }
    }
}
