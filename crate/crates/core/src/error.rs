use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("illegal state: {0}")]
    IllegalState(String),
    #[error("operation not supported on this topology: {0}")]
    UnsupportedTopology(&'static str),
    #[error("enumeration bound exceeded: {size} > {limit}")]
    EnumerationBound { size: u128, limit: u128 },
    #[error("branching process exploded: {pairs} cooperation pairs in one step")]
    Explosion { pairs: u64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error came from reading or writing a file or stream.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
