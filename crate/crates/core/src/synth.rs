//! Seeded synthetic inputs for verification and benchmarking.

use alloc::vec::Vec;

use crate::rng::SplitMix64;
use crate::tensor::{ClipTensor, FrameTensor};

/// Uniform noise frame in [-1, 1).
pub fn random_frame(
    rng: &mut SplitMix64,
    channels: usize,
    height: usize,
    width: usize,
) -> FrameTensor {
    let data: Vec<f32> = (0..channels * height * width)
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    FrameTensor::new(channels, height, width, data).expect("synthetic shape is valid")
}

/// A stream of independent noise frames.
pub fn random_stream(
    rng: &mut SplitMix64,
    frames: usize,
    channels: usize,
    height: usize,
    width: usize,
) -> Vec<FrameTensor> {
    (0..frames)
        .map(|_| random_frame(rng, channels, height, width))
        .collect()
}

/// Noise clip with the same element distribution as [`random_stream`].
pub fn random_clip(
    rng: &mut SplitMix64,
    channels: usize,
    time: usize,
    height: usize,
    width: usize,
) -> ClipTensor {
    ClipTensor::from_frames(&random_stream(rng, time, channels, height, width))
        .expect("frames share a shape")
}
