//! Crate-wide error type.

use std::fmt;
use std::io;

/// Everything that can go wrong across the toolkit, from corpus decoding
/// to checkpoint loading. Variants carry enough context to produce a
/// single-line diagnostic naming the offending field or file.
#[derive(Debug)]
pub enum Error {
    /// Input bytes were not valid UTF-8; line numbers are 1-based.
    Decoding { line: usize, path: String },
    /// An empty corpus where at least one sentence is required.
    EmptyCorpus(String),
    /// Subword vocabulary budget below what the base alphabet needs.
    BudgetTooSmall { budget: usize, required: usize },
    /// An id with no entry in the vocabulary.
    UnknownId(u32),
    /// Numeric preconditions (masking, index ranges, shapes).
    Numeric(String),
    /// A named parameter or gradient went non-finite.
    NonFinite(String),
    /// Shape disagreement between two named tensors.
    ShapeMismatch(String),
    /// A decoder named in a call is absent from the configuration.
    UnknownDecoder(String),
    /// Config file parse or validation failure, naming the key.
    Config(String),
    /// Stored content hash does not match the file on disk.
    HashMismatch { name: String, expected: u64, actual: u64 },
    /// Serialized artifact ended before its manifest said it would.
    Truncated(String),
    /// Serialized artifact carries an unsupported version tag.
    VersionMismatch { found: String, expected: String },
    /// Malformed artifact file (merges, vocab, LM, truecase model).
    Format { path: String, detail: String },
    /// Hypothesis/reference line counts disagree, or similar.
    Mismatch(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Decoding { line, path } => {
                write!(f, "invalid UTF-8 at line {line} of {path}")
            }
            Error::EmptyCorpus(what) => write!(f, "empty corpus: {what}"),
            Error::BudgetTooSmall { budget, required } => write!(
                f,
                "vocabulary budget {budget} is below the {required} entries needed \
                 for the base alphabet plus reserved tokens"
            ),
            Error::UnknownId(id) => write!(f, "unknown token id {id}"),
            Error::Numeric(msg) => write!(f, "{msg}"),
            Error::NonFinite(name) => write!(f, "non-finite values in {name}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::UnknownDecoder(name) => write!(f, "no decoder named {name:?} in config"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::HashMismatch { name, expected, actual } => write!(
                f,
                "content hash mismatch for {name}: checkpoint has {expected:016x}, file has {actual:016x}"
            ),
            Error::Truncated(what) => write!(f, "truncated file: {what}"),
            Error::VersionMismatch { found, expected } => {
                write!(f, "version mismatch: found {found:?}, expected {expected:?}")
            }
            Error::Format { path, detail } => write!(f, "malformed file {path}: {detail}"),
            Error::Mismatch(msg) => write!(f, "{msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
