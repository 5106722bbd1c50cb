//! Dense frame and clip tensors.
//!
//! A frame is a single time slice laid out row-major as (C, H, W); a clip
//! adds a time axis as (C, T, H, W). Tensors are immutable values once
//! built and safe to share read-only across threads.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Kernel geometry along one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimSpec {
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl DimSpec {
    pub fn new(kernel: usize, stride: usize, dilation: usize, padding: usize) -> Self {
        Self {
            kernel,
            stride,
            dilation,
            padding,
        }
    }

    /// Kernel size k, stride 1, dilation 1, no padding.
    pub fn plain(kernel: usize) -> Self {
        Self::new(kernel, 1, 1, 0)
    }

    /// Span of input positions one output element depends on.
    pub fn extent(&self) -> usize {
        self.dilation * (self.kernel - 1) + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 {
            return Err(Error::Shape("kernel must be >= 1".into()));
        }
        if self.stride == 0 || self.dilation == 0 {
            return Err(Error::Shape("stride and dilation must be >= 1".into()));
        }
        Ok(())
    }
}

/// n = floor((m + 2p - d(k-1) - 1) / s) + 1, rejecting n < 1.
pub fn output_size(m: usize, dim: &DimSpec) -> Result<usize> {
    dim.validate()?;
    if m == 0 {
        return Err(Error::Shape("input extent must be >= 1".into()));
    }
    let padded = m + 2 * dim.padding;
    let extent = dim.extent();
    if padded < extent {
        return Err(Error::DegenerateOutput {
            input: m,
            kernel: dim.kernel,
            stride: dim.stride,
            dilation: dim.dilation,
            padding: dim.padding,
        });
    }
    Ok((padded - extent) / dim.stride + 1)
}

/// One time slice of activations, shape (channels, height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FrameTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Shape("frame dimensions must be >= 1".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "frame data length {} != {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Every element set to `value`.
    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, c: usize, h: usize, w: usize) -> f32 {
        self.data[(c * self.height + h) * self.width + w]
    }

    /// Slice of one channel plane, length height*width.
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// A spatio-temporal volume, shape (channels, time, height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTensor {
    channels: usize,
    time: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ClipTensor {
    pub fn new(
        channels: usize,
        time: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 || time == 0 || height == 0 || width == 0 {
            return Err(Error::Shape("clip dimensions must be >= 1".into()));
        }
        if data.len() != channels * time * height * width {
            return Err(Error::Shape(format!(
                "clip data length {} != {}x{}x{}x{}",
                data.len(),
                channels,
                time,
                height,
                width
            )));
        }
        Ok(Self {
            channels,
            time,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, time: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            time,
            height,
            width,
            data: vec![0.0; channels * time * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.channels, self.time, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, c: usize, t: usize, h: usize, w: usize) -> f32 {
        self.data[((c * self.time + t) * self.height + h) * self.width + w]
    }

    /// Extract the frame at time index `t`.
    pub fn frame(&self, t: usize) -> Result<FrameTensor> {
        if t >= self.time {
            return Err(Error::Shape(format!(
                "frame index {t} out of range for clip with {} frames",
                self.time
            )));
        }
        let plane = self.height * self.width;
        let mut data = Vec::with_capacity(self.channels * plane);
        for c in 0..self.channels {
            let base = (c * self.time + t) * plane;
            data.extend_from_slice(&self.data[base..base + plane]);
        }
        FrameTensor::new(self.channels, self.height, self.width, data)
    }

    pub fn into_frames(self) -> Vec<FrameTensor> {
        (0..self.time)
            .map(|t| self.frame(t).expect("index in range"))
            .collect()
    }

    /// Contiguous temporal slice `[start, start + len)`.
    pub fn time_slice(&self, start: usize, len: usize) -> Result<ClipTensor> {
        if len == 0 || start + len > self.time {
            return Err(Error::Shape(format!(
                "time slice [{start}, {}) out of range for clip with {} frames",
                start + len,
                self.time
            )));
        }
        let plane = self.height * self.width;
        let mut data = Vec::with_capacity(self.channels * len * plane);
        for c in 0..self.channels {
            let base = (c * self.time + start) * plane;
            data.extend_from_slice(&self.data[base..base + len * plane]);
        }
        ClipTensor::new(self.channels, len, self.height, self.width, data)
    }

    /// Assemble a clip from frames of identical shape; frame `j` lands at
    /// time index `j` and is recoverable bit-exactly via [`ClipTensor::frame`].
    pub fn from_frames(frames: &[FrameTensor]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("cannot build a clip from zero frames".into()))?;
        let (c, h, w) = first.shape();
        for (i, fr) in frames.iter().enumerate() {
            if fr.shape() != (c, h, w) {
                return Err(Error::Shape(format!(
                    "frame {i} has shape {:?}, expected {:?}",
                    fr.shape(),
                    (c, h, w)
                )));
            }
        }
        let time = frames.len();
        let plane = h * w;
        let mut data = vec![0.0f32; c * time * plane];
        for (t, fr) in frames.iter().enumerate() {
            for ch in 0..c {
                let dst = (ch * time + t) * plane;
                data[dst..dst + plane].copy_from_slice(fr.channel(ch));
            }
        }
        Self::new(c, time, h, w, data)
    }
}

/// Convenience alias matching the operation name used by callers.
pub fn clip_from_frames(frames: &[FrameTensor]) -> Result<ClipTensor> {
    ClipTensor::from_frames(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_size_matches_formula() {
        assert_eq!(output_size(16, &DimSpec::new(3, 1, 1, 0)).unwrap(), 14);
        assert_eq!(output_size(224, &DimSpec::new(3, 2, 1, 1)).unwrap(), 112);
        assert_eq!(output_size(1, &DimSpec::new(1, 1, 1, 0)).unwrap(), 1);
    }

    #[test]
    fn output_size_rejects_kernel_larger_than_padded_input() {
        let err = output_size(2, &DimSpec::new(5, 1, 1, 0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateOutput { .. }));
    }

    #[test]
    fn output_size_with_dilation() {
        // extent = 2*(3-1)+1 = 5
        assert_eq!(output_size(10, &DimSpec::new(3, 1, 2, 0)).unwrap(), 6);
        assert!(output_size(4, &DimSpec::new(3, 1, 2, 0)).is_err());
    }

    #[test]
    fn clip_assembly_shape_bookkeeping() {
        let frames: Vec<FrameTensor> = (0..3)
            .map(|t| FrameTensor::filled(2, 4, 4, t as f32))
            .collect();
        let clip = ClipTensor::from_frames(&frames).unwrap();
        assert_eq!(clip.shape(), (2, 3, 4, 4));
        for (t, frame) in frames.iter().enumerate() {
            assert_eq!(&clip.frame(t).unwrap(), frame);
        }
    }

    #[test]
    fn single_frame_clip_is_identity() {
        let f = FrameTensor::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let clip = ClipTensor::from_frames(core::slice::from_ref(&f)).unwrap();
        assert_eq!(clip.time(), 1);
        assert_eq!(clip.data(), f.data());
    }

    #[test]
    fn mismatched_frames_rejected() {
        let a = FrameTensor::zeros(2, 4, 4);
        let b = FrameTensor::zeros(2, 4, 5);
        assert!(ClipTensor::from_frames(&[a, b]).is_err());
    }

    #[test]
    fn indexing_agrees_between_clip_and_frame() {
        let data: Vec<f32> = (0..2 * 3 * 2 * 2).map(|i| i as f32).collect();
        let clip = ClipTensor::new(2, 3, 2, 2, data).unwrap();
        for t in 0..3 {
            let fr = clip.frame(t).unwrap();
            for c in 0..2 {
                for h in 0..2 {
                    for w in 0..2 {
                        assert_eq!(clip.at(c, t, h, w), fr.at(c, h, w));
                    }
                }
            }
        }
    }
}
