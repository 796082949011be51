use alloc::string::String;
use core::fmt;

/// Errors produced by the core engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The corpus contained no tokens.
    CorpusEmpty,
    /// The vocabulary holds only the reserved specials.
    DegenerateVocab,
    InvalidId {
        id: u32,
        vocab_size: usize,
    },
    /// Probabilities do not sum to one.
    InvalidDistribution {
        mass: f64,
    },
    InvalidParameter(String),
    EmptyDataset,
    InsufficientData(String),
    ZeroLength,
    UndefinedCorrelation,
    Alignment {
        left: usize,
        right: usize,
    },
    ProfileMismatch {
        profile: u64,
        model: u64,
    },
    /// Transport failure talking to an out-of-process model.
    ProviderIo(String),
    /// Peer violated the wire protocol.
    Protocol(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::CorpusEmpty => f.write_str("corpus is empty"),
            Error::DegenerateVocab => f.write_str("vocabulary contains only special tokens"),
            Error::InvalidId { id, vocab_size } => {
                write!(
                    f,
                    "token id {id} out of range for vocabulary of size {vocab_size}"
                )
            }
            Error::InvalidDistribution { mass } => {
                write!(f, "distribution is not normalized (total mass {mass})")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::EmptyDataset => f.write_str("dataset is empty"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::ZeroLength => f.write_str("zero-length input"),
            Error::UndefinedCorrelation => {
                f.write_str("correlation undefined (zero variance or too few points)")
            }
            Error::Alignment { left, right } => {
                write!(f, "misaligned inputs: {left} records vs {right} targets")
            }
            Error::ProfileMismatch { profile, model } => write!(
                f,
                "profile was estimated for model {profile:016x}, not {model:016x}"
            ),
            Error::ProviderIo(msg) => write!(f, "provider i/o: {msg}"),
            Error::Protocol(msg) => write!(f, "protocol error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
