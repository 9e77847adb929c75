use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("malformed {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("count mismatch: {cameras} cameras, {images} images")]
    CountMismatch { cameras: usize, images: usize },

    #[error("invalid rotation for camera {camera}")]
    InvalidRotation { camera: u32 },

    #[error("invalid camera {camera}: {reason}")]
    InvalidCamera { camera: u32, reason: String },

    #[error("invalid image for camera {camera}: {reason}")]
    InvalidImage { camera: u32, reason: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid light {light}: {reason}")]
    InvalidLight { light: u32, reason: String },

    #[error("invalid lighting edit: {0}")]
    InvalidEdit(String),

    #[error("empty mesh")]
    EmptyMesh,

    #[error("resolution mismatch: expected {expected:?}, found {found:?}")]
    ResolutionMismatch { expected: (usize, usize), found: (usize, usize) },

    #[error("ill-conditioned light solve: condition number {condition:e}, singular values {singular_values:?}")]
    IllConditioned { condition: f64, singular_values: Vec<f64> },

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("negative input to tonemap: {0}")]
    NegativeInput(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// Stable machine-readable kind, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingFile(_) => "missing_file",
            Error::Format { .. } => "format",
            Error::CountMismatch { .. } => "count_mismatch",
            Error::InvalidRotation { .. } => "invalid_rotation",
            Error::InvalidCamera { .. } => "invalid_camera",
            Error::InvalidImage { .. } => "invalid_image",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::InvalidLight { .. } => "invalid_light",
            Error::InvalidEdit(_) => "invalid_edit",
            Error::EmptyMesh => "empty_mesh",
            Error::ResolutionMismatch { .. } => "resolution_mismatch",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::BadMagic => "bad_magic",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::Truncated(_) => "truncated",
            Error::NegativeInput(_) => "negative_input",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
