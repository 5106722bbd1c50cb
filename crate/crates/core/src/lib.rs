//! Frame-by-frame inference for spatio-temporal 3D CNNs.
//!
//! A regular 3D CNN consumes a whole clip at a time. When predictions are
//! needed per frame of a live stream, every frame ends up convolved once per
//! sliding-window position it appears in. The continual operators in this
//! crate keep partial results between steps instead, so each frame is
//! convolved exactly once while the emitted outputs stay equal to the
//! clip-wise computation.
//!
//! The crate is split along the same lines as the runtime:
//!
//! * [`tensor`]: dense frame/clip tensors and output-size arithmetic
//! * [`conv`]: regular 3D convolution and its continual reformulation
//! * [`layers`]: delay lines, squeeze-excitation, normalization, activations
//! * [`pool`]: spatial/temporal pooling in clip and continual form
//! * [`network`]: declarative layer graphs, conversion, receptive-field math
//! * [`stream`]: the compiled per-stream runtime
//! * [`cost`]: exact FLOP, state-memory and delay accounting
//! * [`x3d`]: built-in X3D-family architecture descriptors
//!
//! All math is `f32`; memory accounting counts floats. The crate is
//! `no_std` + `alloc` so the runtime can be embedded; IO, file formats and
//! the CLI live in the companion `coconv-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod conv;
pub mod cost;
pub mod error;
pub mod layers;
pub mod network;
pub mod pool;
pub mod rng;
pub mod stream;
pub mod synth;
pub mod tensor;
pub mod x3d;

pub use conv::{conv3d_regular, CoConv, CoConvState, ConvSpec, InitScheme, StepOutput};
pub use error::{Error, Result};
pub use network::{
    analyze, convert_to_continual, forward_clip, forward_clip_dense, Layer, LayerKind, NetworkSpec,
    ReceptiveSummary,
};
pub use stream::CoNetwork;
pub use tensor::{output_size, ClipTensor, DimSpec, FrameTensor};
