use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record `{raw}`: {reason}")]
    Malformed {
        path: PathBuf,
        line: u64,
        raw: String,
        reason: String,
    },

    #[error("unknown mutation operator `{0}`")]
    UnknownOperator(String),

    #[error("unknown outcome `{0}`")]
    UnknownOutcome(String),

    #[error("duplicate entry for mutant {mutant_id}, test {test_id}")]
    DuplicateEntry { mutant_id: u64, test_id: u64 },

    #[error("inconsistent corpus: {0}")]
    Inconsistent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("java parse error at line {line}, column {column}: {message}")]
    Parse { line: u32, column: u32, message: String },

    #[error("unsupported construct `{construct}` at line {line}")]
    Unsupported { construct: String, line: u32 },

    #[error("cannot resolve a statement for {class} line {line}")]
    UnresolvedSite { class: String, line: u32 },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("value {0} is not a probability")]
    NotAProbability(f64),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("kill matrices are defined over different pair universes")]
    UniverseMismatch,

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("model file checksum mismatch or corrupt file: {0}")]
    Checksum(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("fault `{0}` is not detected by any test in the suite")]
    UndetectableFault(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{what}: {source}")]
    Context {
        what: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, what: impl Into<String>) -> Self {
        Error::Context {
            what: what.into(),
            source: Box::new(self),
        }
    }
}
