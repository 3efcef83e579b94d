use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("column `{column}` has a missing value in row 0 and cannot be forward filled")]
    Unfillable { column: String },

    #[error("every column was removed; nothing left to learn from")]
    EmptyDataset,

    #[error("split error: {0}")]
    Split(String),

    #[error("{what}: need at least {needed} rows, got {got}")]
    InsufficientLength {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("graph error at node `{node}`: {message}")]
    Graph { node: String, message: String },

    #[error("state error: {0}")]
    State(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected} features, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("training diverged: non-finite loss at step {step}")]
    Divergence { step: usize },

    #[error("incompatible checkpoint: format version {found}, this build reads version {expected}")]
    Incompatible { found: u32, expected: u32 },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn graph(node: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Graph {
            node: node.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable identifier, used on stderr by the CLI and as
    /// the basis of the C status codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Validation(_) => "validation",
            Error::MissingColumn(_) => "missing-column",
            Error::Unfillable { .. } => "unfillable",
            Error::EmptyDataset => "empty-dataset",
            Error::Split(_) => "split",
            Error::InsufficientLength { .. } => "insufficient-length",
            Error::Graph { .. } => "graph",
            Error::State(_) => "state",
            Error::Contract(_) => "contract",
            Error::Dimension { .. } => "dimension",
            Error::Divergence { .. } => "divergence",
            Error::Incompatible { .. } => "incompatible",
            Error::Config(_) => "config",
        }
    }

    /// Errors caused by bad inputs (files, configs, arguments) as opposed to
    /// failures that happen while running a valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Format(_)
                | Error::Validation(_)
                | Error::MissingColumn(_)
                | Error::Unfillable { .. }
                | Error::EmptyDataset
                | Error::Split(_)
                | Error::Incompatible { .. }
                | Error::Config(_)
        )
    }
}
