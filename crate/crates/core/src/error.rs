use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported or malformed image {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("region {x},{y} {width}x{height} does not fit in a {image_width}x{image_height} image")]
    Bounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        image_width: usize,
        image_height: usize,
    },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("kernel support {support} exceeds the maximum of {max}")]
    KernelTooLarge { support: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Coarse error classes, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Numeric,
    Config,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Format { .. } => ErrorClass::Io,
            Error::KernelTooLarge { .. } | Error::Geometry(_) | Error::DimensionMismatch(_) => {
                ErrorClass::Numeric
            }
            Error::Bounds { .. } | Error::Argument(_) => ErrorClass::Usage,
            Error::Config(_) => ErrorClass::Config,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
