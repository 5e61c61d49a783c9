use std::path::PathBuf;

use thiserror::Error;

/// Feature-table parse failures, one variant per diagnostic.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed header {header:?} (expected \"<n> <d>\")")]
    Header { path: PathBuf, header: String },
    #[error("{path}: table of {n} x {d} exceeds the size guard of {limit} values")]
    Oversize {
        path: PathBuf,
        n: usize,
        d: usize,
        limit: usize,
    },
    #[error("{path}:{line}: expected {expected} values after the id, found {found}")]
    RowLength {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: cannot parse {token:?} as a number")]
    Number { path: PathBuf, line: usize, token: String },
    #[error("{path}:{line}: non-finite value {token:?}")]
    NonFinite { path: PathBuf, line: usize, token: String },
    #[error("{path}:{line}: duplicate id {id:?}")]
    DuplicateId { path: PathBuf, line: usize, id: String },
    #[error("{path}: header declares {expected} rows, found {found}")]
    RowCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Error)]
pub enum AppError {
    /// Bad configuration, flags or unreadable/unwritable paths.
    #[error("{0}")]
    Input(String),
    /// Malformed or dimensionally incompatible data.
    #[error("{0}")]
    Data(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Input(_) => 2,
            AppError::Data(_) => 3,
            AppError::Internal(_) => 4,
        }
    }

    pub fn io(what: &str, path: &std::path::Path, err: std::io::Error) -> Self {
        AppError::Input(format!("{what} {}: {err}", path.display()))
    }
}

impl From<ugaar_core::Error> for AppError {
    fn from(e: ugaar_core::Error) -> Self {
        match e {
            ugaar_core::Error::Argument(_) => AppError::Input(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<FormatError> for AppError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { .. } => AppError::Input(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
