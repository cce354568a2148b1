use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in an input a parse failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Line(usize),
    Byte(usize),
    LineColumn { line: usize, column: usize },
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Line(l) => write!(f, "line {l}"),
            Position::Byte(b) => write!(f, "byte {b}"),
            Position::LineColumn { line, column } => write!(f, "line {line}, column {column}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{format} parse error at {position}: {message}")]
pub struct ParseError {
    pub format: &'static str,
    pub position: Position,
    pub message: String,
}

impl ParseError {
    pub fn new(format: &'static str, position: Position, message: impl Into<String>) -> Self {
        Self {
            format,
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (len {len})")]
    Range {
        what: &'static str,
        index: u64,
        len: u64,
    },

    #[error("unknown element symbol `{0}` (not in the covalent radius catalog)")]
    UnknownElement(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("shape mismatch for {context}: expected {expected} rows, found {found}")]
    Shape {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("column `{0}` has zero variance and cannot be standardized")]
    ZeroVariance(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("session is incompatible with the loaded data; missing: {}", .missing.join(", "))]
    Compatibility { missing: Vec<String> },

    #[error("unsupported {what} version {found} (this build supports up to {supported})")]
    Version {
        what: &'static str,
        found: u64,
        supported: u64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed: {0}")]
    Write(#[source] std::io::Error),

    #[error("invalid JSON document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable identifier, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Range { .. } => "out_of_range",
            Error::UnknownElement(_) => "unknown_element",
            Error::Parse(_) => "parse_error",
            Error::Shape { .. } => "shape_mismatch",
            Error::Schema(_) => "schema_error",
            Error::UnknownColumn(_) => "unknown_column",
            Error::DegenerateField(_) => "degenerate_field",
            Error::Dimension(_) => "dimension_error",
            Error::ZeroVariance(_) => "zero_variance",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Compatibility { .. } => "incompatible_session",
            Error::Version { .. } => "unsupported_version",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io { .. } => "io_error",
            Error::Write(_) => "write_error",
            Error::Json(_) => "invalid_json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
