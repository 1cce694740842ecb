//! Error type shared across the engine.
//!
//! Every failure maps onto one of three user-facing classes, mirroring the
//! CLI exit codes: usage (1), parse (2), semantic (3). I/O problems are
//! folded into the class of the operation that hit them.

use std::fmt;

/// Engine-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Position of a parse failure inside a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePos {
    pub file: String,
    /// 1-based line number.
    pub line: u32,
    /// Byte offset from the start of the stream.
    pub offset: usize,
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} (byte {})", self.file, self.line, self.offset)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("parse error at {pos}: {msg}")]
    Parse { pos: SourcePos, msg: String },

    #[error("{0}")]
    Semantic(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(file: &str, line: u32, offset: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: SourcePos { file: file.to_string(), line, offset },
            msg: msg.into(),
        }
    }

    pub fn semantic(msg: impl Into<String>) -> Error {
        Error::Semantic(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Error {
        Error::Usage(msg.into())
    }

    pub fn io(path: &str, source: std::io::Error) -> Error {
        Error::Io { path: path.to_string(), source }
    }

    /// Process exit code for the CLI: 1 usage, 2 parse, 3 semantic.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Parse { .. } => 2,
            Error::Semantic(_) => 3,
            // An unreadable input file is indistinguishable from a file that
            // cannot be parsed, as far as the caller's recovery goes.
            Error::Io { .. } => 2,
        }
    }
}
