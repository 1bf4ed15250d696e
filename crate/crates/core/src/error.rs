use thiserror::Error;

/// Failures while decoding or encoding `.fwt` tensor files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"FWT1\"")]
    BadMagic([u8; 4]),
    #[error("truncated stream: {0}")]
    Truncated(&'static str),
    #[error("unsupported dtype tag {0}")]
    UnsupportedDtype(u8),
    #[error("unsupported rank {0}, expected 1, 2 or 3")]
    Rank(usize),
    #[error("tensor size {0} exceeds the 32-bit element limit")]
    Size(u64),
    #[error("payload holds {actual} values but dims {dims:?} require {expected}")]
    PayloadLength {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("projection singularity: point lies on the camera plane z = 0")]
    ProjectionSingularity,
    #[error("config error: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("plugin failure: {0}")]
    Plugin(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an I/O failure with the path it concerns.
    pub(crate) fn at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// Stable variant name, used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSample(_) => "InvalidSample",
            Error::ProjectionSingularity => "ProjectionSingularity",
            Error::Config(_) => "Config",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFinite(_) => "NonFinite",
            Error::OutOfRange(_) => "OutOfRange",
            Error::Plugin(_) => "Plugin",
            Error::Format(f) => match f {
                FormatError::BadMagic(_) => "BadMagic",
                FormatError::Truncated(_) => "Truncated",
                FormatError::UnsupportedDtype(_) => "UnsupportedDtype",
                FormatError::Rank(_) => "Rank",
                FormatError::Size(_) => "Size",
                FormatError::PayloadLength { .. } => "PayloadLength",
                FormatError::TrailingBytes(_) => "TrailingBytes",
            },
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
