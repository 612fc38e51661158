use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown object id `{0}`")]
    UnknownObject(String),

    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown object type `{0}`")]
    UnknownType(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error(
        "edge {src} -> {dst} of relation `{relation}` has endpoint types {src_type}->{dst_type}, \
         relation expects {expected_src}->{expected_dst}"
    )]
    TypeMismatch {
        src: String,
        dst: String,
        relation: String,
        src_type: String,
        dst_type: String,
        expected_src: String,
        expected_dst: String,
    },

    #[error("attribute `{attribute}` is {expected}, got a {found} observation")]
    AttributeKind {
        attribute: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid link weight {weight} on edge {src} -> {dst}")]
    InvalidWeight { src: String, dst: String, weight: f64 },

    #[error("term index {term} outside vocabulary 1..={vocab} for attribute `{attribute}`")]
    TermOutOfRange {
        attribute: String,
        term: usize,
        vocab: usize,
    },

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("the network has no objects")]
    EmptyGraph,

    #[error("cluster count {k} exceeds object count {n}")]
    TooManyClusters { k: usize, n: usize },

    #[error("no query has a relevant candidate")]
    EmptyQuerySet,

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
