use std::path::PathBuf;

use crate::corpus::TaskKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Malformed { path: PathBuf, line: u64, msg: String },

    #[error("duplicate subject_id `{0}`")]
    DuplicateSubject(String),

    #[error("{path}:{line}: recording references unknown subject `{subject_id}`")]
    UnknownSubject {
        path: PathBuf,
        line: u64,
        subject_id: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("missing task {0}")]
    MissingTask(TaskKind),

    #[error("cannot concatenate embeddings from different sources")]
    MixedSources,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("training diverged: non-finite loss at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("no embedding for target word `{0}`")]
    MissingEmbedding(String),

    #[error("missing features for subject `{subject_id}`")]
    MissingFeatures { subject_id: String },

    #[error("subject `{subject_id}` not covered by system `{system_id}`")]
    CoverageMismatch {
        subject_id: String,
        system_id: String,
    },

    #[error("member order mismatch: model expects {expected:?}, got {found:?}")]
    MemberOrder {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("empty reference transcript")]
    EmptyReference,

    #[error("fewer subjects ({n}) than folds ({k})")]
    TooFewSubjects { n: usize, k: usize },

    #[error("wav {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
