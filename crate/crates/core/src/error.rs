use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SnpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SnpError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("missing SAE bundle component: {}", .0.display())]
    MissingComponent(PathBuf),

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("labels contain a single class; both classes are required")]
    SingleClass,

    #[error("degenerate bias axis (norm {norm:e})")]
    DegenerateAxis { norm: f64 },

    #[error("feature index {index} out of range for {features} features")]
    IndexOutOfRange { index: usize, features: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("fold {fold} failed: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<SnpError>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SnpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SnpError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs rather than by a failing computation.
    pub fn is_validation(&self) -> bool {
        match self {
            SnpError::Format(_)
            | SnpError::Length(_)
            | SnpError::Validation(_)
            | SnpError::Shape(_)
            | SnpError::MissingComponent(_)
            | SnpError::DuplicateId(_)
            | SnpError::EmptyInput(_)
            | SnpError::SingleClass
            | SnpError::IndexOutOfRange { .. }
            | SnpError::InvalidArgument(_)
            | SnpError::Config(_)
            | SnpError::Json(_)
            | SnpError::Csv(_) => true,
            SnpError::Fold { source, .. } => source.is_validation(),
            SnpError::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            SnpError::DegenerateAxis { .. } => false,
        }
    }

    /// Process exit code used by the CLI: 2 for validation failures, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            3
        }
    }
}
