use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in a parsed document an error was found: `line:column` for XML,
/// a JSON pointer such as `/arcs/3` for json-net documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location(pub String);

impl Location {
    pub fn line_col(line: usize, column: usize) -> Self {
        Location(format!("{line}:{column}"))
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("net: malformed document at {location}: {message}")]
    MalformedNet { location: Location, message: String },
    #[error("net: dangling arc at {location}: endpoint `{endpoint}` does not exist")]
    DanglingArc {
        location: Location,
        endpoint: String,
    },
    #[error("net: missing initial marking")]
    MissingInitialMarking,
    #[error("net: missing initial marking at {0}")]
    MissingInitialMarkingAt(Location),
    #[error("net: invalid net: {0}")]
    InvalidNet(String),
    #[error("net: transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("playout: {which} cap of {limit} exceeded; language may be unbounded or too large")]
    CapExceeded { which: &'static str, limit: usize },

    #[error("variants: unknown label `{0}`")]
    UnknownLabel(String),
    #[error("variants: variant of length {len} exceeds max length {max}")]
    OverLength { len: usize, max: usize },
    #[error("variants: invalid variant: {0}")]
    InvalidVariant(String),
    #[error("variants: malformed line {line} in {path}: {message}")]
    MalformedVariantFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("variants: empty variant set")]
    EmptySet,

    #[error("split: {0}")]
    Split(String),

    #[error("generator: {0}")]
    Generator(String),
    #[error("generator: non-finite loss at epoch {epoch} ({phase})")]
    NonFiniteLoss { epoch: usize, phase: &'static str },
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("metrics: {0}")]
    Metrics(String),
    #[error("stats: {0}")]
    Stats(String),
    #[error("experiments: {0}")]
    Experiment(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
