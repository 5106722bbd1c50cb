//! Spatio-temporal pooling, clip-wise and continual.
//!
//! Pooling decomposes across dimensions: the spatial part runs per frame,
//! and only the spatially-pooled maps of the last `k_T - 1` frames need to
//! be kept between steps. The temporal aggregate is recomputed over the
//! window each step; an incremental max cannot evict expired maxima and
//! `k_T` stays small in practice.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::conv::StepOutput;
use crate::error::{Error, Result};
use crate::tensor::{output_size, ClipTensor, DimSpec, FrameTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Avg,
    Max,
}

/// Spatial extent of the pooling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolSpatial {
    /// Window covers the whole frame; output is 1x1 per channel.
    Global,
    Windowed {
        h: DimSpec,
        w: DimSpec,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSpec {
    pub kind: PoolKind,
    /// Temporal window; dilation must be 1.
    pub temporal: DimSpec,
    pub spatial: PoolSpatial,
}

impl PoolSpec {
    pub fn validate(&self) -> Result<()> {
        self.temporal.validate()?;
        if self.temporal.dilation != 1 {
            return Err(Error::Shape(
                "pooling does not support temporal dilation".into(),
            ));
        }
        if let PoolSpatial::Windowed { h, w } = &self.spatial {
            h.validate()?;
            w.validate()?;
        }
        Ok(())
    }

    pub fn continual_delay(&self) -> usize {
        (self.temporal.kernel - 1).saturating_sub(self.temporal.padding)
    }

    pub fn state_frames(&self) -> usize {
        self.temporal.kernel - 1
    }

    pub fn spatial_out(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match &self.spatial {
            PoolSpatial::Global => Ok((1, 1)),
            PoolSpatial::Windowed { h: dh, w: dw } => {
                Ok((output_size(h, dh)?, output_size(w, dw)?))
            }
        }
    }
}

/// Pool one frame spatially. Average divides by the full window size, with
/// zero padding counted as zeros.
pub fn spatial_pool(
    frame: &FrameTensor,
    kind: PoolKind,
    spatial: &PoolSpatial,
) -> Result<FrameTensor> {
    let (c, in_h, in_w) = frame.shape();
    match spatial {
        PoolSpatial::Global => {
            let plane = in_h * in_w;
            let mut out = Vec::with_capacity(c);
            for ch in 0..c {
                let data = frame.channel(ch);
                let v = match kind {
                    PoolKind::Avg => {
                        let mut sum = 0.0f32;
                        for x in data {
                            sum += *x;
                        }
                        sum / plane as f32
                    }
                    PoolKind::Max => {
                        let mut m = f32::NEG_INFINITY;
                        for x in data {
                            if *x > m {
                                m = *x;
                            }
                        }
                        m
                    }
                };
                out.push(v);
            }
            FrameTensor::new(c, 1, 1, out)
        }
        PoolSpatial::Windowed { h: dh, w: dw } => {
            let n_h = output_size(in_h, dh)?;
            let n_w = output_size(in_w, dw)?;
            let window = (dh.kernel * dw.kernel) as f32;
            let mut out = vec![0.0f32; c * n_h * n_w];
            for ch in 0..c {
                let data = frame.channel(ch);
                for oh in 0..n_h {
                    let ih0 = (oh * dh.stride) as isize - dh.padding as isize;
                    for ow in 0..n_w {
                        let iw0 = (ow * dw.stride) as isize - dw.padding as isize;
                        let v = match kind {
                            PoolKind::Avg => {
                                let mut sum = 0.0f32;
                                for kh in 0..dh.kernel {
                                    let ih = ih0 + (kh * dh.dilation) as isize;
                                    if ih < 0 || ih >= in_h as isize {
                                        continue;
                                    }
                                    for kw in 0..dw.kernel {
                                        let iw = iw0 + (kw * dw.dilation) as isize;
                                        if iw < 0 || iw >= in_w as isize {
                                            continue;
                                        }
                                        sum += data[ih as usize * in_w + iw as usize];
                                    }
                                }
                                sum / window
                            }
                            PoolKind::Max => {
                                let mut m = f32::NEG_INFINITY;
                                let mut saw = false;
                                for kh in 0..dh.kernel {
                                    let ih = ih0 + (kh * dh.dilation) as isize;
                                    for kw in 0..dw.kernel {
                                        let iw = iw0 + (kw * dw.dilation) as isize;
                                        let x = if ih < 0
                                            || ih >= in_h as isize
                                            || iw < 0
                                            || iw >= in_w as isize
                                        {
                                            0.0
                                        } else {
                                            data[ih as usize * in_w + iw as usize]
                                        };
                                        saw = true;
                                        if x > m {
                                            m = x;
                                        }
                                    }
                                }
                                debug_assert!(saw);
                                m
                            }
                        };
                        out[(ch * n_h + oh) * n_w + ow] = v;
                    }
                }
            }
            FrameTensor::new(c, n_h, n_w, out)
        }
    }
}

/// Temporal aggregate over already spatially-pooled maps, oldest first.
/// Missing window positions (temporal zero padding in the clip-wise path,
/// unfilled ring slots in the continual path) enter as zero maps.
fn temporal_aggregate(maps: &[Option<&[f32]>], kind: PoolKind, map_len: usize) -> Vec<f32> {
    let k = maps.len();
    let mut out = vec![0.0f32; map_len];
    match kind {
        PoolKind::Avg => {
            for m in maps.iter().flatten() {
                for (o, v) in out.iter_mut().zip(*m) {
                    *o += *v;
                }
            }
            for o in &mut out {
                *o /= k as f32;
            }
        }
        PoolKind::Max => {
            out.fill(f32::NEG_INFINITY);
            for m in maps {
                match m {
                    Some(m) => {
                        for (o, v) in out.iter_mut().zip(*m) {
                            if *v > *o {
                                *o = *v;
                            }
                        }
                    }
                    None => {
                        for o in &mut out {
                            if 0.0 > *o {
                                *o = 0.0;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Clip-wise pooling, decomposed as spatial-per-frame then temporal.
pub fn pool3d(
    clip: &ClipTensor,
    spec: &PoolSpec,
    apply_temporal_padding: bool,
) -> Result<ClipTensor> {
    spec.validate()?;
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
    let map_len = clip.channels() * n_h * n_w;

    let pooled: Vec<FrameTensor> = (0..clip.time())
        .map(|t| spatial_pool(&clip.frame(t)?, spec.kind, &spec.spatial))
        .collect::<Result<_>>()?;

    let mut frames = Vec::with_capacity(n_t);
    for ot in 0..n_t {
        let window: Vec<Option<&[f32]>> = (0..t_dim.kernel)
            .map(|j| {
                let it = (ot * t_dim.stride + j) as isize - t_dim.padding as isize;
                if it < 0 || it >= clip.time() as isize {
                    None
                } else {
                    Some(pooled[it as usize].data())
                }
            })
            .collect();
        let data = temporal_aggregate(&window, spec.kind, map_len);
        frames.push(FrameTensor::new(clip.channels(), n_h, n_w, data)?);
    }
    ClipTensor::from_frames(&frames)
}

/// Ring of spatially-pooled maps carried by a continual pooling layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CoPoolState {
    ring: Vec<f32>,
    map_len: usize,
    idx: usize,
    seen: u64,
    valid_seen: u64,
    in_h: usize,
    in_w: usize,
    channels: usize,
}

impl CoPoolState {
    pub fn new(spec: &PoolSpec, channels: usize, in_h: usize, in_w: usize) -> Result<Self> {
        spec.validate()?;
        let (n_h, n_w) = spec.spatial_out(in_h, in_w)?;
        let map_len = channels * n_h * n_w;
        Ok(Self {
            ring: vec![0.0; spec.state_frames() * map_len],
            map_len,
            idx: 0,
            seen: 0,
            valid_seen: 0,
            in_h,
            in_w,
            channels,
        })
    }

    pub fn state_floats(&self) -> usize {
        self.ring.len()
    }

    pub fn frames_seen(&self) -> u64 {
        self.seen
    }

    fn slot(&self, i: usize) -> &[f32] {
        &self.ring[i * self.map_len..(i + 1) * self.map_len]
    }
}

/// Advance a continual pooling layer by one frame.
pub fn copool_step(
    frame: &FrameTensor,
    state: &mut CoPoolState,
    spec: &PoolSpec,
) -> Result<StepOutput> {
    copool_step_with(frame, true, state, spec)
}

/// [`copool_step`] with upstream validity threaded through.
pub fn copool_step_with(
    frame: &FrameTensor,
    input_valid: bool,
    state: &mut CoPoolState,
    spec: &PoolSpec,
) -> Result<StepOutput> {
    if frame.channels() != state.channels
        || (frame.height(), frame.width()) != (state.in_h, state.in_w)
    {
        return Err(Error::Shape(format!(
            "frame shape {:?} does not match pool state ({}, {}, {})",
            frame.shape(),
            state.channels,
            state.in_h,
            state.in_w
        )));
    }
    let cur = spatial_pool(frame, spec.kind, &spec.spatial)?;
    let k = spec.temporal.kernel;
    let stored = spec.state_frames();

    let out_data = if stored == 0 {
        cur.data().to_vec()
    } else {
        // Oldest stored map first, current frame last.
        let mut window: Vec<Option<&[f32]>> = Vec::with_capacity(k);
        for j in 0..stored {
            window.push(Some(state.slot((state.idx + j) % stored)));
        }
        window.push(Some(cur.data()));
        let out = temporal_aggregate(&window, spec.kind, state.map_len);
        let base = state.idx * state.map_len;
        state.ring[base..base + state.map_len].copy_from_slice(cur.data());
        state.idx = (state.idx + 1) % stored;
        out
    };

    state.seen += 1;
    if input_valid {
        state.valid_seen += 1;
    }
    let t0 = state.seen - 1;
    let delay = spec.continual_delay() as u64;
    let phase_hit = if spec.temporal.stride == 1 {
        true
    } else {
        (t0 as i64 - delay as i64).rem_euclid(spec.temporal.stride as i64) == 0
    };
    if !phase_hit {
        return Ok(StepOutput::suppressed());
    }
    let (n_h, n_w) = spec.spatial_out(state.in_h, state.in_w)?;
    Ok(StepOutput {
        frame: Some(FrameTensor::new(state.channels, n_h, n_w, out_data)?),
        valid: input_valid && state.valid_seen > delay,
    })
}
