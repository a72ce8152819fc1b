use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image too small: {0}")]
    Dimension(String),

    #[error("image shapes differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("unknown transform op `{0}`")]
    UnknownOp(String),

    #[error("parameter `{name}` of `{op}` is {value}, outside [{min}, {max}]{detail}")]
    ParamOutOfRange {
        op: String,
        name: String,
        value: f64,
        min: f64,
        max: f64,
        detail: &'static str,
    },

    #[error("transform `{op}` has no parameter `{name}`")]
    UnknownParam { op: String, name: String },

    #[error("transform `{op}` is missing parameter `{name}`")]
    MissingParam { op: String, name: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid quality model: {0}")]
    InvalidModel(String),

    #[error("external scorer failed ({status}): {stderr}")]
    ScorerProcess { status: String, stderr: String },

    #[error("external scorer exceeded {0:.1}s timeout")]
    ScorerTimeout(f64),

    #[error("cannot parse scorer output {0:?} as a single number")]
    ScorerParse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed trace: {0}")]
    TraceSyntax(String),

    #[error("unsupported trace format version {found} (supported: {supported})")]
    VersionMismatch { found: u64, supported: u64 },

    #[error("source image hash {actual} does not match trace source {expected}")]
    SourceMismatch { expected: String, actual: String },

    #[error("replayed image hash {actual} does not match trace result {expected}")]
    ResultMismatch { expected: String, actual: String },

    #[error("no decodable images in {0}")]
    EmptyDir(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
