use std::path::PathBuf;

/// Errors produced by rig construction, solvers, and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("blendshape index {index} out of range (rig has {m} blendshapes)")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("invalid corrective term: {0}")]
    InvalidTerm(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("ordering strategy requires a target mesh")]
    MissingTarget,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("unsupported format version {found} (this build reads version {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("refusing to evaluate against noisy reference data: {0}")]
    NoisyReference(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
