use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("checkpoint length mismatch: {0}")]
    LengthMismatch(String),

    #[error("non-finite value in tensor `{name}` at flat index {index}")]
    NonFinite { name: String, index: usize },

    #[error("invalid tensor shape for `{name}`: {reason}")]
    Shape { name: String, reason: String },

    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),

    #[error("prunable set is empty")]
    EmptyPrunable,

    #[error("sparsity {0} out of range [0, 1)")]
    SparsityRange(f64),

    #[error("mask mismatch: {0}")]
    MaskMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("token {token} out of range for vocabulary of size {vocab}")]
    TokenRange { token: usize, vocab: usize },

    #[error("loss diverged (non-finite) at step {step}")]
    Diverged { step: usize },

    #[error("non-finite value during {0}")]
    NonFiniteCompute(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unsupported WAV format: {0}")]
    UnsupportedWav(String),

    #[error("WAV is not mono ({channels} channels)")]
    MultiChannel { channels: u16 },

    #[error("malformed WAV header: {0}")]
    MalformedWav(String),

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
