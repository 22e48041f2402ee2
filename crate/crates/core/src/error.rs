use thiserror::Error;

pub type Result<T> = std::result::Result<T, BopnnError>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BopnnError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("eigen solver did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("insufficient points: need {needed}, have {available}")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("sample contains fewer than two classes")]
    SingleClassSample,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("every training point is in every bag; no out-of-bag estimate")]
    NoOOBPoints,
    #[error("operation requires an ensemble fitted with projection enabled")]
    ProjectionDisabled,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },
    #[error("unknown target column {0:?}")]
    UnknownTarget(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("split leaves an empty side (n = {n})")]
    TooSmall { n: usize },
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("standardization column {column} is degenerate")]
    DegenerateColumn { column: usize },
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BopnnError {
    fn from(e: std::io::Error) -> Self {
        BopnnError::Io(e.to_string())
    }
}
