use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("dimension mismatch in {matrix}: got {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    Dimension {
        matrix: String,
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },

    #[error("membership violation in subsystem `{subsystem}` ({family}): {message} at state {witness:?}")]
    Membership {
        subsystem: String,
        family: String,
        message: String,
        witness: Vec<f64>,
    },

    #[error(transparent)]
    Expr(#[from] crate::memexpr::ExprError),

    #[error("weights are not on the simplex: {0}")]
    Simplex(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("unknown decision variable index {0}")]
    UnknownVariable(usize),

    #[error("singular matrix ({what}), condition estimate {condition:e}")]
    Singular { what: String, condition: f64 },

    #[error("trajectory diverged at step {step} (t = {time})")]
    Diverged { step: usize, time: f64 },

    #[error("invalid binding `{0}`")]
    Binding(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
