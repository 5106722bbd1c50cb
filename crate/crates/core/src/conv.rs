//! Regular 3D convolution and its continual, frame-by-frame reformulation.
//!
//! The continual form convolves each incoming frame with every temporal tap
//! of the kernel exactly once. The tap that completes the window ending at
//! the current frame is emitted (together with previously accumulated
//! partial sums); the remaining taps are accumulated into a ring buffer of
//! `d_T * (k_T - 1)` partial output frames, indexed by the step at which
//! they will complete. Temporal zero-padding of the stream itself is never
//! applied; a layer's declared temporal padding only enters the delay and
//! validity bookkeeping.
//!
//! Accumulation is ordered oldest tap first in both the clip-wise and the
//! continual path, so the two routes produce bit-identical sums for the
//! same inputs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{output_size, ClipTensor, DimSpec, FrameTensor};

/// Hyperparameters and weights of one 3D convolution layer.
///
/// Weights are laid out `(c_out, c_in / groups, k_t, k_h, k_w)`. A spec may
/// be built without weights (e.g. straight from a parsed document) and
/// populated later; execution fails with [`Error::MissingWeights`] until
/// then.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub groups: usize,
    pub temporal: DimSpec,
    pub spatial_h: DimSpec,
    pub spatial_w: DimSpec,
    pub has_bias: bool,
    pub weights: Option<Vec<f32>>,
    pub bias: Option<Vec<f32>>,
    /// When set, the accounting engine reports this many stored frames for
    /// the layer's state row instead of the structural `d_T * (k_T - 1)`.
    /// The runtime ring buffer is unaffected. Used by architecture
    /// descriptors whose published memory ledgers count certain layers
    /// differently than the ring buffer holds.
    pub state_frames_override: Option<usize>,
}

impl ConvSpec {
    pub fn validate(&self) -> Result<()> {
        self.temporal.validate()?;
        self.spatial_h.validate()?;
        self.spatial_w.validate()?;
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Shape("channel counts must be >= 1".into()));
        }
        if self.groups == 0
            || !self.in_channels.is_multiple_of(self.groups)
            || !self.out_channels.is_multiple_of(self.groups)
        {
            return Err(Error::Shape(format!(
                "groups {} must divide in_channels {} and out_channels {}",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.weight_len() {
                return Err(Error::Shape(format!(
                    "weight length {} != expected {}",
                    w.len(),
                    self.weight_len()
                )));
            }
        }
        if self.has_bias {
            if let Some(b) = &self.bias {
                if b.len() != self.out_channels {
                    return Err(Error::Shape(format!(
                        "bias length {} != out_channels {}",
                        b.len(),
                        self.out_channels
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels
            * (self.in_channels / self.groups)
            * self.temporal.kernel
            * self.spatial_h.kernel
            * self.spatial_w.kernel
    }

    /// Output steps between a frame's arrival and the emission of the
    /// clip-wise output it completes: `d_T * (k_T - p_T - 1)`, clamped at 0.
    pub fn continual_delay(&self) -> usize {
        self.temporal.dilation * (self.temporal.kernel - 1).saturating_sub(self.temporal.padding)
    }

    /// Ring-buffer depth in frames: `d_T * (k_T - 1)`.
    pub fn state_frames(&self) -> usize {
        self.temporal.dilation * (self.temporal.kernel - 1)
    }

    /// Spatial output shape for an input frame of (h, w).
    pub fn spatial_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            output_size(h, &self.spatial_h)?,
            output_size(w, &self.spatial_w)?,
        ))
    }

    fn weights_ref(&self) -> Result<&[f32]> {
        self.weights
            .as_deref()
            .ok_or_else(|| Error::MissingWeights("conv".into()))
    }

    /// Convolve one frame with a single temporal tap of the kernel,
    /// accumulating into `acc` (length c_out * n_h * n_w).
    fn accumulate_tap(&self, frame: &FrameTensor, tap: usize, acc: &mut [f32]) -> Result<()> {
        self.accumulate_tap_view(
            frame.data(),
            frame.height() * frame.width(),
            0,
            (frame.height(), frame.width()),
            tap,
            acc,
        )
    }

    /// Tap accumulation over raw storage. `ch_stride` is the element count
    /// between consecutive channels and `offset` the start of the time slice
    /// within a channel, so the same kernel walks frames and clips alike.
    fn accumulate_tap_view(
        &self,
        input: &[f32],
        ch_stride: usize,
        offset: usize,
        in_hw: (usize, usize),
        tap: usize,
        acc: &mut [f32],
    ) -> Result<()> {
        let weights = self.weights_ref()?;
        let (in_h, in_w) = in_hw;
        let (n_h, n_w) = self.spatial_out(in_h, in_w)?;
        debug_assert_eq!(acc.len(), self.out_channels * n_h * n_w);

        let in_per_group = self.in_channels / self.groups;
        let out_per_group = self.out_channels / self.groups;
        let (k_h, k_w) = (self.spatial_h.kernel, self.spatial_w.kernel);
        let k_t = self.temporal.kernel;

        for oc in 0..self.out_channels {
            let group = oc / out_per_group;
            let ic_base = group * in_per_group;
            let w_base = oc * in_per_group * k_t * k_h * k_w;
            for oh in 0..n_h {
                let ih0 = (oh * self.spatial_h.stride) as isize - self.spatial_h.padding as isize;
                for ow in 0..n_w {
                    let iw0 =
                        (ow * self.spatial_w.stride) as isize - self.spatial_w.padding as isize;
                    let mut sub = 0.0f32;
                    for icr in 0..in_per_group {
                        let ic = ic_base + icr;
                        let w_tap = w_base + (icr * k_t + tap) * k_h * k_w;
                        for kh in 0..k_h {
                            let ih = ih0 + (kh * self.spatial_h.dilation) as isize;
                            if ih < 0 || ih >= in_h as isize {
                                continue;
                            }
                            let row = ic * ch_stride + offset + ih as usize * in_w;
                            let w_row = w_tap + kh * k_w;
                            for kw in 0..k_w {
                                let iw = iw0 + (kw * self.spatial_w.dilation) as isize;
                                if iw < 0 || iw >= in_w as isize {
                                    continue;
                                }
                                sub += weights[w_row + kw] * input[row + iw as usize];
                            }
                        }
                    }
                    acc[(oc * n_h + oh) * n_w + ow] += sub;
                }
            }
        }
        Ok(())
    }

    /// Zero-initialized ring state for an input of the given spatial size,
    /// or the steady state for a stream consisting of `seed` repeated.
    pub fn init_state(
        &self,
        scheme: InitScheme,
        seed: Option<&FrameTensor>,
        input_hw: (usize, usize),
    ) -> Result<CoConvState> {
        self.validate()?;
        let (n_h, n_w) = self.spatial_out(input_hw.0, input_hw.1)?;
        let mut state = CoConvState {
            ring: vec![0.0; self.state_frames() * self.out_channels * n_h * n_w],
            frame_len: self.out_channels * n_h * n_w,
            idx: 0,
            seen: 0,
            valid_seen: 0,
            in_h: input_hw.0,
            in_w: input_hw.1,
        };
        if scheme == InitScheme::Replicate {
            let seed = seed.ok_or(Error::MissingSeedFrame)?;
            if seed.shape() != (self.in_channels, input_hw.0, input_hw.1) {
                return Err(Error::Shape(format!(
                    "seed frame shape {:?} does not match conv input {:?}",
                    seed.shape(),
                    (self.in_channels, input_hw.0, input_hw.1)
                )));
            }
            for _ in 0..self.state_frames() {
                self.step(seed, &mut state)?;
            }
        }
        Ok(state)
    }

    /// Advance the continual convolution by one frame.
    ///
    /// The state is updated on every call. A frame is emitted unless the
    /// temporal stride suppresses this step; the `valid` flag goes true once
    /// the layer has consumed `delay + 1` frames.
    pub fn step(&self, frame: &FrameTensor, state: &mut CoConvState) -> Result<StepOutput> {
        self.step_with(frame, true, state)
    }

    /// [`ConvSpec::step`] with upstream validity threaded through. The
    /// emitted output is valid once `delay + 1` valid inputs have been
    /// consumed; upstream validity is monotone, so counting suffices.
    pub fn step_with(
        &self,
        frame: &FrameTensor,
        input_valid: bool,
        state: &mut CoConvState,
    ) -> Result<StepOutput> {
        if frame.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "frame has {} channels, conv expects {}",
                frame.channels(),
                self.in_channels
            )));
        }
        if (frame.height(), frame.width()) != (state.in_h, state.in_w) {
            return Err(Error::Shape(format!(
                "frame is {}x{}, state was initialized for {}x{}",
                frame.height(),
                frame.width(),
                state.in_h,
                state.in_w
            )));
        }
        let (n_h, n_w) = self.spatial_out(state.in_h, state.in_w)?;
        let k_t = self.temporal.kernel;
        let d_t = self.temporal.dilation;
        let buf = self.state_frames();

        // Newest tap completes the window ending at this frame.
        let mut out = vec![0.0f32; state.frame_len];
        if buf > 0 {
            out.copy_from_slice(state.slot(state.idx));
        }
        self.accumulate_tap(frame, k_t - 1, &mut out)?;
        if self.has_bias {
            if let Some(bias) = &self.bias {
                let plane = n_h * n_w;
                for oc in 0..self.out_channels {
                    for v in &mut out[oc * plane..(oc + 1) * plane] {
                        *v += bias[oc];
                    }
                }
            }
        }

        // Remaining taps feed the windows completing d_T*(k_T-1-i) steps out.
        if buf > 0 {
            state.slot_mut(state.idx).fill(0.0);
            for tap in 0..k_t - 1 {
                let ahead = d_t * (k_t - 1 - tap);
                let slot = (state.idx + ahead) % buf;
                let mut partial = vec![0.0f32; state.frame_len];
                self.accumulate_tap(frame, tap, &mut partial)?;
                for (dst, src) in state.slot_mut(slot).iter_mut().zip(&partial) {
                    *dst += *src;
                }
            }
            state.idx = (state.idx + 1) % buf;
        }

        state.seen += 1;
        if input_valid {
            state.valid_seen += 1;
        }
        let t0 = state.seen - 1;
        let delay = self.continual_delay() as u64;
        let phase_hit = if self.temporal.stride == 1 {
            true
        } else {
            (t0 as i64 - delay as i64).rem_euclid(self.temporal.stride as i64) == 0
        };
        if !phase_hit {
            return Ok(StepOutput::suppressed());
        }
        let valid = input_valid && state.valid_seen > delay;
        let frame = FrameTensor::new(self.out_channels, n_h, n_w, out)?;
        Ok(StepOutput {
            frame: Some(frame),
            valid,
        })
    }
}

/// How continual state is seeded before the first real frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// All state zero. Early outputs equal the clip-wise computation on a
    /// stream left-padded with zero frames.
    Zeros,
    /// State as if the first frame had been playing forever.
    Replicate,
}

/// Carried state of one continual convolution: the ring of partial output
/// frames plus the cycling write index.
#[derive(Debug, Clone, PartialEq)]
pub struct CoConvState {
    ring: Vec<f32>,
    frame_len: usize,
    idx: usize,
    seen: u64,
    valid_seen: u64,
    in_h: usize,
    in_w: usize,
}

impl CoConvState {
    pub fn state_floats(&self) -> usize {
        self.ring.len()
    }

    pub fn slots(&self) -> usize {
        self.ring.len().checked_div(self.frame_len).unwrap_or(0)
    }

    pub fn index(&self) -> usize {
        self.idx
    }

    pub fn frames_seen(&self) -> u64 {
        self.seen
    }

    fn slot(&self, i: usize) -> &[f32] {
        &self.ring[i * self.frame_len..(i + 1) * self.frame_len]
    }

    fn slot_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.ring[i * self.frame_len..(i + 1) * self.frame_len]
    }

    /// Contents of slot `i`, for tests and diagnostics.
    pub fn slot_data(&self, i: usize) -> &[f32] {
        self.slot(i)
    }
}

/// One emission of a continual layer.
///
/// `frame` is `None` when a temporal stride suppressed this step. `valid`
/// is false while the layer (or anything upstream) is still inside its
/// transient.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub frame: Option<FrameTensor>,
    pub valid: bool,
}

impl StepOutput {
    pub fn suppressed() -> Self {
        Self {
            frame: None,
            valid: false,
        }
    }
}

/// Dense clip-wise 3D convolution, the oracle the continual path is checked
/// against. Zero padding is applied in every dimension where the spec
/// declares it; pass `apply_temporal_padding = false` to run the layer the
/// way a converted continual network defines it.
pub fn conv3d(
    clip: &ClipTensor,
    spec: &ConvSpec,
    apply_temporal_padding: bool,
) -> Result<ClipTensor> {
    spec.validate()?;
    if clip.channels() != spec.in_channels {
        return Err(Error::Shape(format!(
            "clip has {} channels, conv expects {}",
            clip.channels(),
            spec.in_channels
        )));
    }
    let t_dim = DimSpec {
        padding: if apply_temporal_padding {
            spec.temporal.padding
        } else {
            0
        },
        ..spec.temporal
    };
    let n_t = output_size(clip.time(), &t_dim)?;
    let (n_h, n_w) = spec.spatial_out(clip.height(), clip.width())?;
    let plane = n_h * n_w;
    let mut out = vec![0.0f32; spec.out_channels * n_t * plane];

    // Oldest temporal tap first, matching continual accumulation order.
    let in_plane = clip.height() * clip.width();
    let ch_stride = clip.time() * in_plane;
    let mut tap_acc = vec![0.0f32; spec.out_channels * plane];
    for tap in 0..spec.temporal.kernel {
        for ot in 0..n_t {
            let it = (ot * t_dim.stride + tap * t_dim.dilation) as isize - t_dim.padding as isize;
            if it < 0 || it >= clip.time() as isize {
                continue;
            }
            tap_acc.fill(0.0);
            spec.accumulate_tap_view(
                clip.data(),
                ch_stride,
                it as usize * in_plane,
                (clip.height(), clip.width()),
                tap,
                &mut tap_acc,
            )?;
            for oc in 0..spec.out_channels {
                for i in 0..plane {
                    out[(oc * n_t + ot) * plane + i] += tap_acc[oc * plane + i];
                }
            }
        }
    }
    if spec.has_bias {
        if let Some(bias) = &spec.bias {
            for oc in 0..spec.out_channels {
                for v in &mut out[oc * n_t * plane..(oc + 1) * n_t * plane] {
                    *v += bias[oc];
                }
            }
        }
    }
    ClipTensor::new(spec.out_channels, n_t, n_h, n_w, out)
}

/// Clip-wise convolution with the spec's declared padding in force.
pub fn conv3d_regular(clip: &ClipTensor, spec: &ConvSpec) -> Result<ClipTensor> {
    conv3d(clip, spec, true)
}

/// A convolution spec bundled with helpers for building test and toy layers.
#[derive(Debug, Clone)]
pub struct CoConv;

impl CoConv {
    /// 1D temporal convolution over scalar frames, handy in tests and docs.
    pub fn temporal_1d(taps: &[f32], stride: usize, dilation: usize, padding: usize) -> ConvSpec {
        ConvSpec {
            in_channels: 1,
            out_channels: 1,
            groups: 1,
            temporal: DimSpec::new(taps.len(), stride, dilation, padding),
            spatial_h: DimSpec::plain(1),
            spatial_w: DimSpec::plain(1),
            has_bias: false,
            weights: Some(taps.to_vec()),
            bias: None,
            state_frames_override: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use alloc::vec::Vec;

    fn scalar_frame(v: f32) -> FrameTensor {
        FrameTensor::new(1, 1, 1, vec![v]).unwrap()
    }

    fn scalar_clip(vals: &[f32]) -> ClipTensor {
        ClipTensor::new(1, vals.len(), 1, 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn repeated_1d_convolution() {
        // kernel (alpha, beta), no padding: out[j] = alpha*x[j] + beta*x[j+1]
        let (alpha, beta) = (0.25f32, -1.5f32);
        let spec = CoConv::temporal_1d(&[alpha, beta], 1, 1, 0);
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let out = conv3d_regular(&scalar_clip(&xs), &spec).unwrap();
        assert_eq!(out.time(), 5);
        for j in 0..5 {
            assert_eq!(out.at(0, j, 0, 0), alpha * xs[j] + beta * xs[j + 1]);
        }
    }

    #[test]
    fn identity_kernel_is_identity() {
        let spec = ConvSpec {
            in_channels: 2,
            out_channels: 2,
            groups: 2,
            temporal: DimSpec::plain(1),
            spatial_h: DimSpec::plain(1),
            spatial_w: DimSpec::plain(1),
            has_bias: false,
            weights: Some(vec![1.0, 1.0]),
            bias: None,
            state_frames_override: None,
        };
        let data: Vec<f32> = (0..2 * 3 * 2 * 2).map(|i| i as f32 * 0.5).collect();
        let clip = ClipTensor::new(2, 3, 2, 2, data.clone()).unwrap();
        let out = conv3d_regular(&clip, &spec).unwrap();
        assert_eq!(out.data(), &data[..]);
    }

    /// Independent brute-force oracle: one accumulator per output element,
    /// loops interleaved differently from the implementation.
    fn naive_conv3d(clip: &ClipTensor, spec: &ConvSpec, pad_t: usize) -> Vec<f32> {
        let (k_t, k_h, k_w) = (
            spec.temporal.kernel,
            spec.spatial_h.kernel,
            spec.spatial_w.kernel,
        );
        let n_t = (clip.time() + 2 * pad_t - spec.temporal.dilation * (k_t - 1) - 1)
            / spec.temporal.stride
            + 1;
        let n_h =
            (clip.height() + 2 * spec.spatial_h.padding - spec.spatial_h.dilation * (k_h - 1) - 1)
                / spec.spatial_h.stride
                + 1;
        let n_w =
            (clip.width() + 2 * spec.spatial_w.padding - spec.spatial_w.dilation * (k_w - 1) - 1)
                / spec.spatial_w.stride
                + 1;
        let in_per_group = spec.in_channels / spec.groups;
        let out_per_group = spec.out_channels / spec.groups;
        let weights = spec.weights.as_ref().unwrap();
        let mut out = Vec::new();
        for oc in 0..spec.out_channels {
            let ic0 = (oc / out_per_group) * in_per_group;
            for ot in 0..n_t {
                for oh in 0..n_h {
                    for ow in 0..n_w {
                        let mut acc = 0.0f64;
                        for icr in 0..in_per_group {
                            for kt in 0..k_t {
                                for kh in 0..k_h {
                                    for kw in 0..k_w {
                                        let it = (ot * spec.temporal.stride
                                            + kt * spec.temporal.dilation)
                                            as isize
                                            - pad_t as isize;
                                        let ih = (oh * spec.spatial_h.stride
                                            + kh * spec.spatial_h.dilation)
                                            as isize
                                            - spec.spatial_h.padding as isize;
                                        let iw = (ow * spec.spatial_w.stride
                                            + kw * spec.spatial_w.dilation)
                                            as isize
                                            - spec.spatial_w.padding as isize;
                                        if it < 0
                                            || it >= clip.time() as isize
                                            || ih < 0
                                            || ih >= clip.height() as isize
                                            || iw < 0
                                            || iw >= clip.width() as isize
                                        {
                                            continue;
                                        }
                                        let w = weights[(((oc * in_per_group + icr) * k_t + kt)
                                            * k_h
                                            + kh)
                                            * k_w
                                            + kw];
                                        acc += (w * clip.at(
                                            ic0 + icr,
                                            it as usize,
                                            ih as usize,
                                            iw as usize,
                                        )) as f64;
                                    }
                                }
                            }
                        }
                        if spec.has_bias {
                            acc += spec.bias.as_ref().unwrap()[oc] as f64;
                        }
                        out.push(acc as f32);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn regular_conv_matches_naive_oracle() {
        let mut rng = SplitMix64::new(11);
        let clip = ClipTensor::new(
            2,
            5,
            4,
            4,
            (0..2 * 5 * 4 * 4).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let spec = ConvSpec {
            in_channels: 2,
            out_channels: 3,
            groups: 1,
            temporal: DimSpec::plain(2),
            spatial_h: DimSpec::plain(3),
            spatial_w: DimSpec::plain(3),
            has_bias: true,
            weights: Some(
                (0..3 * 2 * 2 * 3 * 3)
                    .map(|_| rng.uniform(-1.0, 1.0))
                    .collect(),
            ),
            bias: Some((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect()),
            state_frames_override: None,
        };
        let got = conv3d_regular(&clip, &spec).unwrap();
        let want = naive_conv3d(&clip, &spec, 0);
        assert_eq!(got.data().len(), want.len());
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() <= 1e-5, "got {g}, want {w}");
        }
    }

    #[test]
    fn fig3_trace_emits_completed_window_and_stores_oldest_tap() {
        let (alpha, beta) = (2.0f32, 3.0f32);
        let spec = CoConv::temporal_1d(&[alpha, beta], 1, 1, 0);
        let mut state = spec.init_state(InitScheme::Zeros, None, (1, 1)).unwrap();
        let (b, c, d, e) = (1.0f32, 10.0, 100.0, 1000.0);
        for v in [b, c, d] {
            spec.step(&scalar_frame(v), &mut state).unwrap();
        }
        let out = spec.step(&scalar_frame(e), &mut state).unwrap();
        assert_eq!(out.frame.unwrap().data()[0], alpha * d + beta * e);
        assert!(out.valid);
        // Stored partial is the oldest-tap product of the newest frame.
        assert_eq!(state.slot_data(state.index()), &[alpha * e]);
    }

    #[test]
    fn kernel_one_is_stateless_and_immediate() {
        let mut rng = SplitMix64::new(3);
        let spec = ConvSpec {
            in_channels: 2,
            out_channels: 3,
            groups: 1,
            temporal: DimSpec::plain(1),
            spatial_h: DimSpec::new(3, 1, 1, 1),
            spatial_w: DimSpec::new(3, 1, 1, 1),
            has_bias: false,
            weights: Some((0..3 * 2 * 9).map(|_| rng.uniform(-1.0, 1.0)).collect()),
            bias: None,
            state_frames_override: None,
        };
        let frame =
            FrameTensor::new(2, 4, 4, (0..32).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let mut state = spec.init_state(InitScheme::Zeros, None, (4, 4)).unwrap();
        assert_eq!(state.state_floats(), 0);
        let out = spec.step(&frame, &mut state).unwrap();
        assert!(out.valid);
        assert_eq!(spec.continual_delay(), 0);

        let clip = ClipTensor::from_frames(core::slice::from_ref(&frame)).unwrap();
        let reg = conv3d_regular(&clip, &spec).unwrap();
        assert_eq!(out.frame.unwrap().data(), reg.data());
    }

    #[test]
    fn dilated_stream_matches_regular_with_delay() {
        // k_T=3, d_T=2: delay 4; output t-4 of the regular conv appears at step t.
        let mut rng = SplitMix64::new(17);
        let spec = ConvSpec {
            in_channels: 1,
            out_channels: 1,
            groups: 1,
            temporal: DimSpec::new(3, 1, 2, 0),
            spatial_h: DimSpec::plain(1),
            spatial_w: DimSpec::plain(1),
            has_bias: false,
            weights: Some(vec![0.5, -1.0, 2.0]),
            bias: None,
            state_frames_override: None,
        };
        let xs: Vec<f32> = (0..10).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let reg = conv3d(&scalar_clip(&xs), &spec, false).unwrap();
        let mut state = spec.init_state(InitScheme::Zeros, None, (1, 1)).unwrap();
        for (t, x) in xs.iter().enumerate() {
            let out = spec.step(&scalar_frame(*x), &mut state).unwrap();
            if t >= 4 {
                assert!(out.valid);
                let got = out.frame.unwrap().data()[0];
                let want = reg.at(0, t - 4, 0, 0);
                assert!((got - want).abs() <= 1e-6);
            } else {
                assert!(!out.valid);
            }
        }
    }

    #[test]
    fn delay_formula() {
        let mk = |k, d, p| ConvSpec {
            temporal: DimSpec::new(k, 1, d, p),
            ..CoConv::temporal_1d(&vec![1.0; k], 1, d, p)
        };
        assert_eq!(mk(3, 1, 1).continual_delay(), 1);
        assert_eq!(mk(1, 1, 0).continual_delay(), 0);
        assert_eq!(mk(5, 1, 2).continual_delay(), 2);
        assert_eq!(mk(3, 2, 0).continual_delay(), 4);
    }

    #[test]
    fn zeros_init_shape() {
        let spec = CoConv::temporal_1d(&[1.0, 1.0, 1.0], 1, 1, 0);
        let state = spec.init_state(InitScheme::Zeros, None, (1, 1)).unwrap();
        assert_eq!(state.slots(), 2);
        assert_eq!(state.index(), 0);
        assert!(state.slot_data(0).iter().all(|&v| v == 0.0));
        assert!(state.slot_data(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn replicate_init_holds_partials_of_seed() {
        let (alpha, beta) = (0.5f32, 4.0f32);
        let spec = CoConv::temporal_1d(&[alpha, beta], 1, 1, 0);
        let x = 3.0f32;
        let state = spec
            .init_state(InitScheme::Replicate, Some(&scalar_frame(x)), (1, 1))
            .unwrap();
        assert_eq!(state.slot_data(state.index()), &[alpha * x]);
        // The very next step is already the boring-video steady state.
        let mut state = state;
        let out = spec.step(&scalar_frame(x), &mut state).unwrap();
        assert!(out.valid);
        assert_eq!(out.frame.unwrap().data()[0], alpha * x + beta * x);
    }

    #[test]
    fn replicate_requires_seed() {
        let spec = CoConv::temporal_1d(&[1.0, 1.0], 1, 1, 0);
        assert_eq!(
            spec.init_state(InitScheme::Replicate, None, (1, 1))
                .unwrap_err(),
            Error::MissingSeedFrame
        );
    }

    #[test]
    fn replicate_equals_zeros_for_kernel_one() {
        let spec = CoConv::temporal_1d(&[2.0], 1, 1, 0);
        let z = spec.init_state(InitScheme::Zeros, None, (1, 1)).unwrap();
        let r = spec
            .init_state(InitScheme::Replicate, Some(&scalar_frame(1.0)), (1, 1))
            .unwrap();
        assert_eq!(z.state_floats(), 0);
        assert_eq!(r.state_floats(), 0);
    }

    #[test]
    fn zeros_init_prefix_equals_left_padded_oracle() {
        let mut rng = SplitMix64::new(23);
        let spec = ConvSpec {
            in_channels: 1,
            out_channels: 1,
            groups: 1,
            temporal: DimSpec::new(3, 1, 1, 0),
            spatial_h: DimSpec::plain(1),
            spatial_w: DimSpec::plain(1),
            has_bias: true,
            weights: Some(vec![1.0, -2.0, 0.25]),
            bias: Some(vec![0.125]),
            state_frames_override: None,
        };
        let xs: Vec<f32> = (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut padded = vec![0.0f32; 2];
        padded.extend_from_slice(&xs);
        let oracle = conv3d(&scalar_clip(&padded), &spec, false).unwrap();
        let mut state = spec.init_state(InitScheme::Zeros, None, (1, 1)).unwrap();
        for (t, x) in xs.iter().enumerate() {
            let out = spec.step(&scalar_frame(*x), &mut state).unwrap();
            let got = out.frame.unwrap().data()[0];
            assert_eq!(got, oracle.at(0, t, 0, 0));
        }
    }

    #[test]
    fn strided_emission_phase() {
        // s_T=2, k_T=3: delay 2, so emissions land on even steps.
        let spec = CoConv::temporal_1d(&[1.0, 1.0, 1.0], 2, 1, 0);
        let mut state = spec.init_state(InitScheme::Zeros, None, (1, 1)).unwrap();
        let xs: Vec<f32> = (1..=9).map(|v| v as f32).collect();
        let reg = conv3d(&scalar_clip(&xs), &spec, false).unwrap();
        let mut emitted = Vec::new();
        for (t, x) in xs.iter().enumerate() {
            let out = spec.step(&scalar_frame(*x), &mut state).unwrap();
            match out.frame {
                Some(f) => {
                    assert_eq!(t % 2, 0, "emission off phase at step {t}");
                    if out.valid {
                        emitted.push(f.data()[0]);
                    }
                }
                None => assert_eq!(t % 2, 1),
            }
        }
        let want: Vec<f32> = (0..reg.time()).map(|j| reg.at(0, j, 0, 0)).collect();
        assert_eq!(emitted, want);
    }

    #[test]
    fn determinism_bit_identical() {
        let mut rng = SplitMix64::new(5);
        let spec = ConvSpec {
            in_channels: 2,
            out_channels: 2,
            groups: 1,
            temporal: DimSpec::plain(3),
            spatial_h: DimSpec::new(3, 1, 1, 1),
            spatial_w: DimSpec::new(3, 1, 1, 1),
            has_bias: false,
            weights: Some((0..2 * 2 * 27).map(|_| rng.uniform(-1.0, 1.0)).collect()),
            bias: None,
            state_frames_override: None,
        };
        let frames: Vec<FrameTensor> = (0..6)
            .map(|_| {
                FrameTensor::new(2, 3, 3, (0..18).map(|_| rng.uniform(-1.0, 1.0)).collect())
                    .unwrap()
            })
            .collect();
        let run = |frames: &[FrameTensor]| {
            let mut st = spec.init_state(InitScheme::Zeros, None, (3, 3)).unwrap();
            frames
                .iter()
                .map(|f| spec.step(f, &mut st).unwrap().frame.unwrap().into_data())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(&frames), run(&frames));
    }

    #[test]
    fn state_size_matches_formula() {
        for (k, d) in [(1usize, 1usize), (2, 1), (3, 2), (5, 1)] {
            let spec = ConvSpec {
                in_channels: 2,
                out_channels: 3,
                groups: 1,
                temporal: DimSpec::new(k, 1, d, 0),
                spatial_h: DimSpec::new(3, 2, 1, 1),
                spatial_w: DimSpec::plain(1),
                has_bias: false,
                weights: Some(vec![0.0; 3 * 2 * k * 3]),
                bias: None,
                state_frames_override: None,
            };
            let state = spec.init_state(InitScheme::Zeros, None, (5, 1)).unwrap();
            let (n_h, n_w) = spec.spatial_out(5, 1).unwrap();
            assert_eq!(state.state_floats(), d * (k - 1) * 3 * n_h * n_w);
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let spec = CoConv::temporal_1d(&[1.0, 1.0], 1, 1, 0);
        let mut state = spec.init_state(InitScheme::Zeros, None, (1, 1)).unwrap();
        let bad = FrameTensor::zeros(2, 1, 1);
        assert!(spec.step(&bad, &mut state).is_err());
    }
}
