use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("corrupt pooling indices: {0}")]
    CorruptIndices(String),
    #[error("invalid lane mask: {0}")]
    InvalidMask(String),
    #[error("weight slot `{slot}`: {reason}")]
    Weight { slot: String, reason: String },
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Failures decoding the binary tensor (`AFT1`) and weight (`AFW1`) formats.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("truncated input: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("invalid tensor header: {0}")]
    InvalidHeader(String),
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("unknown tensor name `{0}`")]
    UnknownTensor(String),
    #[error("duplicate tensor name `{0}`")]
    DuplicateTensor(String),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
