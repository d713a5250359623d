//! Error type shared by every module in the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: left {left:?} vs right {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid shape: product of extents {extents:?} does not match data length {len}")]
    ShapeDataMismatch { extents: Vec<usize>, len: usize },

    #[error("{what} must be positive, got {got}")]
    NonPositive { what: &'static str, got: f64 },

    #[error("standard deviation must be non-negative, got {0}")]
    NegativeStd(f64),

    #[error("inter-class term undefined for a single class")]
    SingleClass,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("layer {index} ({kind}): {detail}")]
    LayerChain {
        index: usize,
        kind: &'static str,
        detail: String,
    },

    #[error("backward called with a stale cache (network changed since forward)")]
    StaleCache,

    #[error("class {class} has {available} labeled pixels, need more than {requested}")]
    InsufficientClass {
        class: usize,
        available: usize,
        requested: usize,
    },

    #[error("coordinate ({row}, {col}) outside cube of {height}x{width}")]
    CoordOutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("cube has {cube} bands but network expects {expected}")]
    BandMismatch { cube: usize, expected: usize },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),

    #[error("label {label} exceeds declared class count {max}")]
    LabelOutOfRange { label: u32, max: u32 },

    #[error("palette has {have} colors, need at least {need}")]
    PaletteTooSmall { have: usize, need: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
