//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input tensor had zero height or width.
    #[error("empty input: height and width must both be at least 1")]
    EmptyInput,

    /// Two tensors that must agree in shape did not.
    #[error("shape mismatch: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    ShapeMismatch {
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    /// An input that must be binary (every value exactly 0 or 1) was not.
    #[error("input must be binary: {count} value(s) other than 0 and 1")]
    NotBinary { count: usize },

    /// A value left the unit interval where [0, 1] is required.
    #[error("value out of range at index {index}: {value} not in [0, 1]")]
    OutOfRange { index: usize, value: f64 },

    /// An edge mask marked a pixel the saliency ground truth calls background.
    #[error("inconsistent edge mask: {count} edge pixel(s) with background ground truth")]
    InconsistentEdges { count: usize },

    /// The model variant does not match the requested operation.
    #[error("model variant mismatch: {0}")]
    VariantMismatch(&'static str),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    /// A configuration file or value could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// A data file violated its format; `offset` is the byte where parsing failed.
    #[error("malformed file at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
