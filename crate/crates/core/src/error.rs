use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Reasons a dataset file can fail to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyFile,
    MalformedHeader(String),
    NonNumeric { column: String, value: String },
    NonFinite { column: String },
    NegativeValue { column: String },
    NonBinaryLabel(String),
    RowLength { expected: usize, found: usize },
    NoRows,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyFile => write!(f, "empty file"),
            ParseErrorKind::MalformedHeader(why) => write!(f, "malformed header: {why}"),
            ParseErrorKind::NonNumeric { column, value } => {
                write!(f, "non-numeric value {value:?} in column {column}")
            }
            ParseErrorKind::NonFinite { column } => write!(f, "non-finite value in column {column}"),
            ParseErrorKind::NegativeValue { column } => {
                write!(f, "negative expression value in column {column}")
            }
            ParseErrorKind::NonBinaryLabel(v) => write!(f, "label {v:?} is not 0 or 1"),
            ParseErrorKind::RowLength { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            ParseErrorKind::NoRows => write!(f, "header present but no patient rows"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate cutoff: all {0} scores are equal, labels would be one-class")]
    DegenerateCutoff(usize),
    #[error("invalid disease spec: {0}")]
    Spec(String),
    #[error("class composition: {0}")]
    Class(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("gene {0:?} is not present in the matrix")]
    MissingGene(String),
    #[error("stratification failed: {0}")]
    Stratification(String),
    #[error("{op} is not supported for model family {family}")]
    Unsupported { op: &'static str, family: String },
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
