use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] pirum_core::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    /// A malformed row of an input file.
    #[error("line {line}: {msg}")]
    Line { line: u64, msg: String },
    #[error("{0}")]
    Invalid(String),
    /// Bad flags or configuration; reported before any work starts.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
