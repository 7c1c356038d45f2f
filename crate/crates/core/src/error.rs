use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("split '{split}' has no samples with a={a}, y={y}")]
    EmptySubgroup { split: String, a: u8, y: u8 },

    #[error("split '{split}' has no samples with a={a}")]
    EmptyGroup { split: String, a: u8 },

    #[error("column '{column}' is not binary: value '{value}'")]
    NonBinary { column: String, value: String },

    #[error("column '{column}' has non-numeric value '{value}'")]
    NonNumeric { column: String, value: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("hessian is not positive definite")]
    NotPositiveDefinite,

    #[error("fairness gap is exactly zero; nothing to reweigh")]
    AlreadyFair,

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short stable identifier, used by the CLI for machine-readable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::MissingColumn(_) => "missing_column",
            Error::RaggedRow { .. } => "ragged_row",
            Error::EmptySubgroup { .. } | Error::EmptyGroup { .. } => "empty_subgroup",
            Error::NonBinary { .. } => "non_binary",
            Error::NonNumeric { .. } => "non_numeric",
            Error::Config(_) => "config",
            Error::Dimension(_) => "dimension",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::AlreadyFair => "already_fair",
            Error::Internal(_) => "internal",
        }
    }

    /// True for failures caused by user input rather than by a bug.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Internal(_))
    }
}
