use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] entcal_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// A model, profile or results file could not be parsed.
    #[error("{what}, line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable short code for the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        use entcal_core::Error as C;
        match self {
            Error::Core(e) => match e {
                C::CorpusEmpty => "corpus-empty",
                C::DegenerateVocab => "degenerate-vocab",
                C::InvalidId { .. } => "invalid-id",
                C::InvalidDistribution { .. } => "invalid-distribution",
                C::InvalidParameter(_) => "invalid-parameter",
                C::EmptyDataset => "empty-dataset",
                C::InsufficientData(_) => "insufficient-data",
                C::ZeroLength => "zero-length",
                C::UndefinedCorrelation => "undefined-correlation",
                C::Alignment { .. } => "alignment",
                C::ProfileMismatch { .. } => "profile-mismatch",
                C::ProviderIo(_) => "provider-io",
                C::Protocol(_) => "protocol",
            },
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
