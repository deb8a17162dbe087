use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to locate the
/// offending tensor, line, or batch without a debugger.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid shape for {what}: {shape:?} ({msg})")]
    InvalidShape {
        what: &'static str,
        shape: Vec<usize>,
        msg: String,
    },

    #[error("non-finite logits")]
    NonFiniteLogits,

    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("backward already ran on this tape")]
    BackwardTwice,

    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("target side lacks chunk annotations; the bi-scale objective needs boundaries and tags")]
    MissingAnnotations,

    #[error("non-finite loss in batch {batch} ({detail})")]
    NonFiniteLoss { batch: usize, detail: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("length mismatch: {what} has {lhs} items vs {rhs}")]
    LengthMismatch {
        what: &'static str,
        lhs: usize,
        rhs: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
