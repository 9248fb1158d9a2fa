use std::path::PathBuf;

/// Errors raised anywhere in the imputation and diagnostics pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error in column `{column}`: {message}")]
    Schema { column: String, message: String },
    #[error("empty input file {0}")]
    EmptyFile(PathBuf),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("column `{column}` has missing cells but is required to be fully observed")]
    IncompleteColumn { column: String },
    #[error("bisection failed to calibrate missingness intercept: {0}")]
    Calibration(String),
    #[error("design matrix is rank deficient ({cols} columns)")]
    RankDeficient { cols: usize },
    #[error("too few rows: need at least {needed}, have {available}")]
    TooFewRows { needed: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("logistic regression failed to converge: {0}")]
    Convergence(String),
    #[error("complete separation persists after shrinkage")]
    Separation,
    #[error("no replicates stored for column `{0}`")]
    NoReplicates(String),
    #[error("column `{0}` is not binary")]
    NotBinary(String),
    #[error("chain {chain}, iteration {iteration}, column `{column}`: {source}")]
    Engine {
        chain: usize,
        iteration: usize,
        column: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::io("<csv>", std::io::Error::other(e))
    }
}
