use thiserror::Error;

use crate::corr_factor::Violation;

/// Errors raised by the geometric kernels and solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("retraction failed: {0}")]
    RetractionFailure(String),

    #[error("Sylvester operator is singular: {0}")]
    SingularSylvester(String),

    #[error("logarithm undefined for antipodal pair{}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    AntipodalLogarithm { row: Option<usize> },

    #[error("alignment stagnated (gradient norm {grad_norm:e} after {iterations} iterations)")]
    AlignmentStagnation { grad_norm: f64, iterations: usize },

    #[error("numerical rank {rank} exceeds k = {k}")]
    RankExceedsK { rank: usize, k: usize },

    #[error("invalid correlation matrix: {}", describe(.0))]
    InvalidCorrelation(Vec<Violation>),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<GeomError>,
    },
}

fn describe(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, GeomError>;

pub(crate) fn invalid(msg: impl Into<String>) -> GeomError {
    GeomError::InvalidInput(msg.into())
}
