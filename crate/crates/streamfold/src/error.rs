//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file (syntax or schema violation).
    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    /// A layer violates a structural rule (non-integral output size, bad bit
    /// widths, kernel larger than the padded input, ...).
    #[error("layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },

    /// A layer's input shape does not match the previous layer's output.
    #[error("layer {layer}: expected input {expected_n}x{expected_n}x{expected_c}, got {got_n}x{got_n}x{got_c}")]
    ShapeMismatch {
        layer: usize,
        expected_n: u32,
        expected_c: u32,
        got_n: u32,
        got_c: u32,
    },

    /// MAC count or folding was requested for a layer without weights.
    #[error("layer {layer} ({kind}) has no MACs")]
    NoMacs { layer: usize, kind: String },

    #[error("NaN is not a valid input value")]
    NanInput,

    #[error("slice length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("threshold scale must be positive and finite, got {0}")]
    BadScale(f64),

    /// SIMD must divide the layer's input channels and PE its output channels.
    #[error("layer {layer}: folding pe={pe} simd={simd} does not tile a {c}->{c_out} channel weight matrix")]
    UntiledWeights {
        layer: usize,
        pe: u32,
        simd: u32,
        c: u32,
        c_out: u32,
    },

    #[error("no LUT cost entry for a={a} w={w} and the default rule is disabled")]
    MissingCostEntry { a: u8, w: u8 },

    /// A required resource exceeds the device budget (or the utilization cap).
    #[error("device unsuitable: {resource} needs {required} but the usable budget is {available}")]
    DeviceUnsuitable {
        resource: String,
        required: u64,
        available: u64,
    },

    /// Folding entry count differs from the number of weighted layers.
    #[error("folding lists {got} layers but the topology has {expected} weighted layers")]
    FoldingMismatch { expected: usize, got: usize },

    /// Tensor shape, bit width, or encoding does not match what an operation expects.
    #[error("tensor mismatch: {0}")]
    TensorMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Internal consistency failure (a bug), e.g. a wedged simulation pipeline.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}
