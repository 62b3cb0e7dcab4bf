use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sequence capacity exceeded: need {needed} positions but max_seq_len is {max}")]
    Capacity { needed: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("character {ch:?} at byte offset {offset} is not in the tokenizer alphabet")]
    OutOfAlphabet { ch: char, offset: usize },

    #[error("token id {id} is outside the vocabulary (size {vocab})")]
    OutOfVocab { id: u32, vocab: usize },

    #[error("attribute {attr:?} contains a newline; record rendering would not be injective")]
    NewlineInValue { attr: String },

    #[error("duplication directive ({sender:?}, {recipient:?}) x{count} is unsatisfiable: {reason}")]
    UnsatisfiablePlan {
        sender: String,
        recipient: String,
        count: usize,
        reason: String,
    },

    #[error("fabrication constraints unsatisfiable: {0}")]
    UnsatisfiableFabrication(String),

    #[error("loss has no contributing positions (all masked out)")]
    EmptyLoss,

    #[error("csv ingest failed for {path}: {reason}")]
    CsvIngest { path: PathBuf, reason: String },

    #[error("checkpoint error at {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("model parameters changed during soft-prompt training (fingerprint {before:#018x} -> {after:#018x})")]
    ModelNotFrozen { before: u64, after: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
