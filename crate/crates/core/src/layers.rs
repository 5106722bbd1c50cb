//! Pointwise building blocks: normalization, activations, channel
//! attention, and the delay lines that keep residual branches time-aligned.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{ClipTensor, FrameTensor};

/// Inference-mode normalization parameters, one entry per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpec {
    pub scale: Vec<f32>,
    pub shift: Vec<f32>,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub epsilon: f32,
}

impl NormSpec {
    /// Identity normalization for `channels` channels.
    pub fn identity(channels: usize, epsilon: f32) -> Self {
        Self {
            scale: alloc::vec![1.0; channels],
            shift: alloc::vec![0.0; channels],
            mean: alloc::vec![0.0; channels],
            var: alloc::vec![1.0; channels],
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.scale.len();
        if self.shift.len() != c || self.mean.len() != c || self.var.len() != c {
            return Err(Error::Shape(
                "norm parameter vectors must share one length".into(),
            ));
        }
        if self.var.iter().any(|v| *v < 0.0) {
            return Err(Error::Shape("running variance must be non-negative".into()));
        }
        Ok(())
    }

    fn apply_channel(&self, c: usize, data: &mut [f32]) {
        let denom = libm::sqrtf(self.var[c] + self.epsilon);
        for x in data {
            *x = (*x - self.mean[c]) / denom * self.scale[c] + self.shift[c];
        }
    }
}

/// (x - mean) / sqrt(var + eps) * scale + shift, per channel.
pub fn norm_infer(frame: &FrameTensor, spec: &NormSpec) -> Result<FrameTensor> {
    spec.validate()?;
    if frame.channels() != spec.channels() {
        return Err(Error::Shape(format!(
            "frame has {} channels, norm expects {}",
            frame.channels(),
            spec.channels()
        )));
    }
    let mut out = frame.clone();
    let plane = frame.height() * frame.width();
    for c in 0..spec.channels() {
        spec.apply_channel(c, &mut out.data_mut()[c * plane..(c + 1) * plane]);
    }
    Ok(out)
}

pub fn norm_infer_clip(clip: &ClipTensor, spec: &NormSpec) -> Result<ClipTensor> {
    spec.validate()?;
    if clip.channels() != spec.channels() {
        return Err(Error::Shape(format!(
            "clip has {} channels, norm expects {}",
            clip.channels(),
            spec.channels()
        )));
    }
    let mut out = clip.clone();
    let stride = clip.time() * clip.height() * clip.width();
    for c in 0..spec.channels() {
        spec.apply_channel(c, &mut out.data_mut()[c * stride..(c + 1) * stride]);
    }
    Ok(out)
}

/// Momentum for per-step statistics updates that matches the moving-average
/// dynamics of clip-based updates with momentum `mom_clip`.
pub fn momentum_adjust(mom_clip: f64, timesteps: u64) -> f64 {
    2.0 / (1.0 + timesteps as f64 * (2.0 / mom_clip - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn eval(&self, x: f32) -> f32 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub fn apply_frame(&self, frame: &FrameTensor) -> FrameTensor {
        let mut out = frame.clone();
        for v in out.data_mut() {
            *v = self.eval(*v);
        }
        out
    }

    pub fn apply_clip(&self, clip: &ClipTensor) -> ClipTensor {
        let mut out = clip.clone();
        for v in out.data_mut() {
            *v = self.eval(*v);
        }
        out
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + libm::expf(-x))
}

/// Squeeze-and-excitation channel attention.
///
/// The continual variant pools spatially only, so it carries no temporal
/// state and adds no delay. With `temporal_pool` set (the clip-wise 3D
/// form), one gate is computed from the whole clip and applied everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SeSpec {
    pub channels: usize,
    pub reduction: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub temporal_pool: bool,
    pub w1: Option<Vec<f32>>,
    pub b1: Option<Vec<f32>>,
    pub w2: Option<Vec<f32>>,
    pub b2: Option<Vec<f32>>,
}

impl SeSpec {
    pub fn new(channels: usize, reduction: usize) -> Self {
        Self {
            channels,
            reduction,
            hidden: Self::hidden_width(channels, reduction),
            activation: Activation::Relu,
            temporal_pool: false,
            w1: None,
            b1: None,
            w2: None,
            b2: None,
        }
    }

    pub fn hidden_width(channels: usize, reduction: usize) -> usize {
        (channels / reduction).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden != Self::hidden_width(self.channels, self.reduction) {
            return Err(Error::Shape(
                "SE hidden width inconsistent with reduction".into(),
            ));
        }
        let check = |name: &str, got: Option<usize>, want: usize| -> Result<()> {
            match got {
                Some(len) if len != want => Err(Error::Shape(format!(
                    "SE {name} has length {len}, expected {want}"
                ))),
                _ => Ok(()),
            }
        };
        check(
            "w1",
            self.w1.as_ref().map(Vec::len),
            self.hidden * self.channels,
        )?;
        check("b1", self.b1.as_ref().map(Vec::len), self.hidden)?;
        check(
            "w2",
            self.w2.as_ref().map(Vec::len),
            self.channels * self.hidden,
        )?;
        check("b2", self.b2.as_ref().map(Vec::len), self.channels)?;
        Ok(())
    }

    fn params(&self) -> Result<SeParams<'_>> {
        match (&self.w1, &self.b1, &self.w2, &self.b2) {
            (Some(w1), Some(b1), Some(w2), Some(b2)) => Ok((w1, b1, w2, b2)),
            _ => Err(Error::MissingWeights("se".into())),
        }
    }

    /// Gate vector from per-channel means.
    fn gate(&self, means: &[f32]) -> Result<Vec<f32>> {
        let (w1, b1, w2, b2) = self.params()?;
        let mut hidden = Vec::with_capacity(self.hidden);
        for j in 0..self.hidden {
            let mut acc = b1[j];
            for c in 0..self.channels {
                acc += w1[j * self.channels + c] * means[c];
            }
            hidden.push(self.activation.eval(acc));
        }
        let mut gate = Vec::with_capacity(self.channels);
        for c in 0..self.channels {
            let mut acc = b2[c];
            for j in 0..self.hidden {
                acc += w2[c * self.hidden + j] * hidden[j];
            }
            gate.push(sigmoid(acc));
        }
        Ok(gate)
    }
}

type SeParams<'a> = (&'a [f32], &'a [f32], &'a [f32], &'a [f32]);

fn channel_means_frame(frame: &FrameTensor) -> Vec<f32> {
    let plane = (frame.height() * frame.width()) as f32;
    (0..frame.channels())
        .map(|c| {
            let mut sum = 0.0f32;
            for x in frame.channel(c) {
                sum += *x;
            }
            sum / plane
        })
        .collect()
}

/// Spatial-only channel attention for one frame; no state, no delay.
pub fn se_step(frame: &FrameTensor, spec: &SeSpec) -> Result<FrameTensor> {
    spec.validate()?;
    if frame.channels() != spec.channels {
        return Err(Error::Shape(format!(
            "frame has {} channels, SE expects {}",
            frame.channels(),
            spec.channels
        )));
    }
    let gate = spec.gate(&channel_means_frame(frame))?;
    let mut out = frame.clone();
    let plane = frame.height() * frame.width();
    for (c, g) in gate.iter().enumerate() {
        for v in &mut out.data_mut()[c * plane..(c + 1) * plane] {
            *v *= *g;
        }
    }
    Ok(out)
}

/// Clip-wise SE: one global gate when `temporal_pool` is set, otherwise the
/// spatial-only gate applied independently at every time index.
pub fn se_clip(clip: &ClipTensor, spec: &SeSpec) -> Result<ClipTensor> {
    spec.validate()?;
    if clip.channels() != spec.channels {
        return Err(Error::Shape(format!(
            "clip has {} channels, SE expects {}",
            clip.channels(),
            spec.channels
        )));
    }
    if spec.temporal_pool {
        let volume = (clip.time() * clip.height() * clip.width()) as f32;
        let stride = clip.time() * clip.height() * clip.width();
        let means: Vec<f32> = (0..spec.channels)
            .map(|c| {
                let mut sum = 0.0f32;
                for x in &clip.data()[c * stride..(c + 1) * stride] {
                    sum += *x;
                }
                sum / volume
            })
            .collect();
        let gate = spec.gate(&means)?;
        let mut out = clip.clone();
        for (c, g) in gate.iter().enumerate() {
            for v in &mut out.data_mut()[c * stride..(c + 1) * stride] {
                *v *= *g;
            }
        }
        Ok(out)
    } else {
        let frames: Vec<FrameTensor> = (0..clip.time())
            .map(|t| se_step(&clip.frame(t)?, spec))
            .collect::<Result<_>>()?;
        ClipTensor::from_frames(&frames)
    }
}

/// FIFO of the last `capacity` frames, emitting the frame from `capacity`
/// steps ago. Used to hold residual branches back by the delay of the path
/// they bypass. Starts full of zero frames flagged not-yet-valid, so its
/// float count is constant from construction.
#[derive(Debug, Clone)]
pub struct DelayLine {
    queue: VecDeque<(FrameTensor, bool)>,
    capacity: usize,
    shape: (usize, usize, usize),
}

impl DelayLine {
    pub fn new(capacity: usize, channels: usize, height: usize, width: usize) -> Self {
        let mut queue = VecDeque::with_capacity(capacity + 1);
        for _ in 0..capacity {
            queue.push_back((FrameTensor::zeros(channels, height, width), false));
        }
        Self {
            queue,
            capacity,
            shape: (channels, height, width),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_floats(&self) -> usize {
        self.queue.iter().map(|(f, _)| f.data().len()).sum()
    }

    pub fn step(&mut self, frame: FrameTensor, valid: bool) -> Result<(FrameTensor, bool)> {
        if frame.shape() != self.shape {
            return Err(Error::Shape(format!(
                "frame shape {:?} does not match delay line {:?}",
                frame.shape(),
                self.shape
            )));
        }
        if self.capacity == 0 {
            return Ok((frame, valid));
        }
        self.queue.push_back((frame, valid));
        Ok(self.queue.pop_front().expect("prefilled queue"))
    }

    /// Test hook: change the effective delay without rebuilding the line.
    #[doc(hidden)]
    pub fn tamper(&mut self, delta: isize) {
        if delta > 0 {
            let (c, h, w) = self.shape;
            for _ in 0..delta {
                self.queue.push_front((FrameTensor::zeros(c, h, w), false));
            }
        } else {
            for _ in 0..(-delta) {
                self.queue.pop_front();
            }
        }
        self.capacity = self.queue.len();
    }
}
