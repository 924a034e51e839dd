use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::engine::ExecError;
use crate::metasql::CompileError;
use crate::sql::SqlError;
use crate::xform::TransformError;
use crate::xml::XmlError;
use crate::xpath::XPathError;

/// Any failure surfaced to a caller of the library or the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("xml: {0}")]
    Xml(#[from] XmlError),
    #[error("path: {0}")]
    XPath(#[from] XPathError),
    #[error("function: {0}")]
    Transform(#[from] TransformError),
    #[error("sql: {0}")]
    Sql(#[from] SqlError),
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
    #[error("runtime: {0}")]
    Exec(#[from] ExecError),
    #[error("{}: {source}", file.display())]
    Import { file: PathBuf, source: SqlError },
    #[error("{file}:{line}: {reason}")]
    Layout { file: PathBuf, line: usize, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    /// Process exit status: 1 compile error, 2 runtime error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Xml(_) | Error::XPath(_) | Error::Transform(_) | Error::Sql(_) | Error::Compile(_) | Error::Import { .. } => 1,
            Error::Exec(_) => 2,
            Error::Layout { .. } | Error::Io { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
