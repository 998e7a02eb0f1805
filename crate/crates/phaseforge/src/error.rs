//! Error type shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the measurement pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scene induces an absolute phase outside `[0, 2*pi*f)`.
    #[error("absolute phase {value} at pixel ({x}, {y}) outside [0, {limit}) for frequency {frequency}")]
    PhaseOutOfRange {
        x: usize,
        y: usize,
        value: f64,
        limit: f64,
        frequency: u32,
    },

    /// A scalar argument violates its documented range.
    #[error("{what} = {value} outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Two grids that must share dimensions do not.
    #[error("dimension mismatch: {left:?} vs {right:?} in {context}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
        context: &'static str,
    },

    /// High/low frequency pair given in the wrong order.
    #[error("frequency order violated: f_h = {f_h} must be >= f_l = {f_l}")]
    FrequencyOrder { f_h: u32, f_l: u32 },

    /// A checkpoint or phase map was built for a different fringe frequency.
    #[error("frequency mismatch: expected {expected}, got {actual} in {context}")]
    FrequencyMismatch {
        expected: u32,
        actual: u32,
        context: &'static str,
    },

    /// Tensor shapes incompatible with the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// 2x2 pooling requires even spatial dimensions.
    #[error("odd dimensions {height}x{width} for 2x2 pooling")]
    OddDimensions { height: usize, width: usize },

    /// Classification target outside `[0, classes)`.
    #[error("target {value} at pixel ({x}, {y}) outside [0, {classes})")]
    TargetOutOfRange {
        x: usize,
        y: usize,
        value: i32,
        classes: usize,
    },

    /// A statistic was requested over zero valid pixels.
    #[error("empty mask: {context}")]
    EmptyMask { context: &'static str },

    /// Dataset lacks a fringe frequency required by the operation.
    #[error("dataset at {path} is missing frequency {frequency}")]
    DatasetMissingFrequency { path: PathBuf, frequency: u32 },

    /// No checkpoint file where one was required.
    #[error("missing checkpoint: {path}")]
    MissingCheckpoint { path: PathBuf },

    /// Dataset lacks data required by a sweep or evaluation.
    #[error("missing data: {detail}")]
    MissingData { detail: String },

    /// Invalid configuration (bad key, bad value, impossible request).
    #[error("config error: {detail}")]
    Config { detail: String },

    /// A binary container did not parse.
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(detail: impl Into<String>) -> Self {
        Error::Config {
            detail: detail.into(),
        }
    }
}
