use alloc::string::String;
use core::fmt;

/// Errors raised by tensor construction, layer stepping and network compilation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Dimension or channel-count mismatch. The message names the offender.
    Shape(String),
    /// The output-size formula produced n < 1.
    DegenerateOutput {
        input: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        padding: usize,
    },
    /// Replicate initialization requires a seed frame.
    MissingSeedFrame,
    /// A layer was asked to execute before weights were installed.
    MissingWeights(String),
    /// The layer cannot be expressed in continual form.
    Unconvertible(String),
    /// A clip or stream is shorter than the receptive field requires.
    InsufficientFrames { needed: usize, got: usize },
}

impl core::error::Error for Error {}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::DegenerateOutput {
                input,
                kernel,
                stride,
                dilation,
                padding,
            } => write!(
                f,
                "degenerate output size for input {input} with kernel {kernel}, \
                 stride {stride}, dilation {dilation}, padding {padding}"
            ),
            Error::MissingSeedFrame => write!(f, "replicate initialization requires a seed frame"),
            Error::MissingWeights(name) => write!(f, "layer `{name}` has no weights installed"),
            Error::Unconvertible(msg) => write!(f, "cannot convert to continual form: {msg}"),
            Error::InsufficientFrames { needed, got } => {
                write!(f, "insufficient frames: need at least {needed}, got {got}")
            }
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
