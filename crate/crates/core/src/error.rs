use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt data: {0}")]
    CorruptData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("box {bbox} lies outside the {width}x{height} image")]
    OutOfBounds {
        bbox: crate::BBox,
        width: usize,
        height: usize,
    },
    #[error("anchor {0} is smaller than the minimum side")]
    AnchorTooSmall(crate::BBox),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("descriptor layout mismatch")]
    LayoutMismatch,
    #[error("channel map mismatch: {0}")]
    ChannelMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("no valid bins")]
    NoValidBins,
    #[error("insufficient valid bins: need at least 2, found {0}")]
    InsufficientBins(usize),
    #[error("unsupported model version {0}")]
    VersionMismatch(u32),
    #[error("malformed file {path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error("model invariant violated: {0}")]
    InvalidModel(String),
    #[error("missing score raster for category {0:?}")]
    MissingCategory(String),
    #[error("supporter score has not been looked up")]
    MissingSupporterScore,
    #[error("scene configuration infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
