use std::path::PathBuf;

use corrgeom::GeomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{}: no data rows", path.display())]
    EmptyFile { path: PathBuf },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("subject {subject}: {source}")]
    Subject {
        subject: String,
        #[source]
        source: GeomError,
    },

    #[error(transparent)]
    Geometry(#[from] GeomError),

    #[error("could not write {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for invalid input, 3 for solver stagnation,
    /// 4 for I/O and parse failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. }
            | PipelineError::Parse { .. }
            | PipelineError::EmptyFile { .. }
            | PipelineError::Output { .. } => 4,
            PipelineError::Subject { source, .. } | PipelineError::Geometry(source) => {
                geometry_code(source)
            }
            PipelineError::DegenerateInput(_)
            | PipelineError::Manifest(_)
            | PipelineError::Validation(_) => 2,
        }
    }
}

fn geometry_code(e: &GeomError) -> i32 {
    match e {
        GeomError::AlignmentStagnation { .. } => 3,
        GeomError::Sample { source, .. } => geometry_code(source),
        _ => 2,
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
