//! Crate-wide error type.
//!
//! Variants map onto the failure classes surfaced by the library: shape and
//! vocabulary violations in the math core, contract misuse at module
//! boundaries, capacity exhaustion in the corpus generators, numeric
//! divergence during training, and I/O or integrity failures around
//! checkpoints and data files.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    Vocab { id: u32, vocab_size: usize },

    #[error("sequence length {len} outside supported range [{min}, {max}]")]
    Length { len: usize, min: usize, max: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("capacity exhausted: {0}")]
    Capacity(String),

    #[error("non-finite value in {context} (unlearn={ce_unl}, update={ce_upd}, retain={kl_rtn})")]
    NonFinite {
        context: String,
        ce_unl: f64,
        ce_upd: f64,
        kl_rtn: f64,
    },

    #[error("training diverged at step {step}: {reason}")]
    Divergence { step: u64, reason: String },

    #[error("provenance mismatch: expected {expected}, found {found}")]
    Provenance { expected: String, found: String },

    #[error("checkpoint integrity failure in {path}: {reason}")]
    Integrity { path: PathBuf, reason: String },

    #[error("checkpoint version {found} unsupported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("undefined similarity: zero-magnitude activation vector")]
    UndefinedSimilarity,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
