//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration document could not be parsed. `location` carries the
    /// `line:column` reported by the parser when available.
    #[error("config syntax error{}: {message}", fmt_location(.location))]
    ConfigSyntax {
        message: String,
        location: Option<(usize, usize)>,
    },

    /// A configuration document parsed but is semantically invalid.
    #[error("invalid config: {0}")]
    Config(String),

    /// A graph failed validation; every violation is listed.
    #[error("invalid causal graph:\n{}", .0.join("\n"))]
    InvalidGraph(Vec<String>),

    /// A value fell outside the domain declared for its variable.
    #[error("variable `{variable}`: value {value} outside declared domain{}", fmt_line(.line))]
    OutOfDomain {
        variable: String,
        value: String,
        line: Option<u64>,
    },

    /// A dataset row or parent assignment did not match the expected schema.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("dataset is empty")]
    EmptyDataset,

    /// A mechanism could not be fitted or sampled.
    #[error("mechanism error for `{variable}`: {message}")]
    Mechanism { variable: String, message: String },

    /// A fairness metric is undefined for the given pool (e.g. a single-group
    /// pool for demographic parity). Callers skip and count these.
    #[error("metric undefined: {0}")]
    DegeneratePool(String),

    #[error("malformed record field `{field}`: {message}")]
    MalformedField { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}{}", fmt_line(.line))]
    Csv {
        path: PathBuf,
        message: String,
        line: Option<u64>,
    },

    #[error("refusing to overwrite existing file {0} (pass overwrite=true)")]
    WouldOverwrite(PathBuf),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn fmt_location(loc: &Option<(usize, usize)>) -> String {
    match loc {
        Some((line, col)) => format!(" at {line}:{col}"),
        None => String::new(),
    }
}

fn fmt_line(line: &Option<u64>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}
