use std::io;

use thiserror::Error;

use crate::board::EntryKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bit length {0} is below the minimum of 16")]
    BitLength(u64),
    #[error("no safe prime found within {0} attempts")]
    ParameterSearch(usize),
    #[error("invalid group parameters: {0}")]
    InvalidParams(&'static str),
    #[error("element is not in the order-q subgroup")]
    NotInSubgroup,
    #[error("degenerate key: secret scalars are both zero")]
    DegenerateKey,
    #[error("invalid threshold configuration: t = {t}, n = {n}")]
    Threshold { t: usize, n: usize },
    #[error("need {needed} distinct decryption shares, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("proof verification failed: {0}")]
    Proof(String),
    #[error("index {index} out of range for {len} alternatives")]
    OutOfRange { index: usize, len: usize },
    #[error("list lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("author {author:?} may not post {kind:?} entries")]
    Unauthorized { author: String, kind: EntryKind },
    #[error("unknown author {0:?}")]
    UnknownAuthor(String),
    #[error("oracle refused: {0}")]
    OracleRefused(String),
    #[error("plaintext tag mismatch: expected {expected}, got {got}")]
    TagMismatch { expected: String, got: String },
    #[error("unregistered hash key {0}")]
    UnknownHashKey(u32),
    #[error("choice {0:?} is not on the slate")]
    NotOnSlate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("tally aborted at board index {index}: {reason}")]
    TallyAborted { index: u64, reason: String },
    #[error("malformed board payload at index {index}: {reason}")]
    Payload { index: u64, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
