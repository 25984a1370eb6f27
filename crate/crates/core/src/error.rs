use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid arguments or configuration supplied by the caller.
    #[error("usage error: {0}")]
    Usage(String),

    /// Well-formed input whose contents violate a structural rule
    /// (mismatched SNP lists, duplicate ids, inconsistent counts).
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn parse(path: impl Into<String>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    ///
    /// 2 = usage, 3 = parse/schema, 4 = numerical non-convergence. I/O
    /// failures are reported as parse/schema since they prevent ingestion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Degenerate(_) => 2,
            Error::Schema(_) | Error::Parse { .. } | Error::Io { .. } => 3,
            Error::NonConvergence(_) => 4,
        }
    }
}
