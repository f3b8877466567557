//! Crate-wide error type.

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("voxel index {index:?} outside dims {dims:?}")]
    IndexOutOfBounds { index: [usize; 3], dims: [usize; 3] },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("empty region: no voxel carries any of labels {labels:?}")]
    EmptyRegion { labels: Vec<u8> },

    #[error(
        "empty prediction: no voxel carries any of labels {labels:?}; \
         fall back to the phase-1 box"
    )]
    EmptyPrediction { labels: Vec<u8> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("voxel value {value} is not a valid label (expected an integer in 0..=255)")]
    InvalidLabel { value: f64 },

    #[error("malformed MetaImage header: {0}")]
    Header(String),

    #[error("unsupported element type {0:?}")]
    UnsupportedElementType(String),

    #[error("unsupported NDims = {0} (only 3-D images are supported)")]
    UnsupportedNDims(usize),

    #[error("external ElementDataFile {0:?} is not supported; only LOCAL single-file .mha")]
    ExternalDataFile(String),

    #[error("payload too short: expected {expected} bytes, found {found}")]
    PayloadTooShort { expected: usize, found: usize },

    #[error("{extra} trailing bytes after the declared payload")]
    TrailingData { extra: usize },

    #[error("decompression failed: {0}")]
    Decompress(String),

    #[error("surface distance undefined: exactly one of the two masks is empty")]
    UndefinedDistance,

    #[error("degenerate prior {0}: the foreground prior must lie strictly inside (0, 1)")]
    DegeneratePrior(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid crop sidecar: {0}")]
    Sidecar(String),

    #[error("crop sidecar version {found} is newer than supported version {supported}")]
    SidecarVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}
