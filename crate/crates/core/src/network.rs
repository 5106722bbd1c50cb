//! Declarative network descriptions, clip-to-continual conversion, and the
//! clip-wise execution path that serves as the oracle for the streaming
//! runtime.
//!
//! A [`NetworkSpec`] is an ordered layer list plus the per-frame input
//! shape. The same spec runs in two modes: clip-wise via [`forward_clip`]
//! (the "unrolled" form, with declared temporal padding applied unless the
//! spec has been converted) and frame-wise via [`crate::stream::CoNetwork`].
//! [`convert_to_continual`] flips a spec to stream semantics: declared
//! temporal padding stays recorded for delay bookkeeping but is no longer
//! applied, squeeze-excitation drops its temporal pooling, and residual
//! skip paths gain matching delay lines when compiled.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::conv::{conv3d, ConvSpec};
use crate::error::{Error, Result};
use crate::layers::{norm_infer_clip, se_clip, Activation, NormSpec, SeSpec};
use crate::pool::{pool3d, PoolKind, PoolSpatial, PoolSpec};
use crate::rng::SplitMix64;
use crate::tensor::{ClipTensor, DimSpec};

/// Per-frame shape (channels, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpec {
    pub in_features: usize,
    pub out_features: usize,
    pub has_bias: bool,
    pub weights: Option<Vec<f32>>,
    pub bias: Option<Vec<f32>>,
}

impl LinearSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 || self.out_features == 0 {
            return Err(Error::Shape("linear feature counts must be >= 1".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.in_features * self.out_features {
                return Err(Error::Shape(format!(
                    "linear weight length {} != {}x{}",
                    w.len(),
                    self.out_features,
                    self.in_features
                )));
            }
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_features {
                return Err(Error::Shape("linear bias length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn apply_vec(&self, x: &[f32]) -> Result<Vec<f32>> {
        let w = self
            .weights
            .as_ref()
            .ok_or_else(|| Error::MissingWeights("linear".into()))?;
        let mut out = Vec::with_capacity(self.out_features);
        for o in 0..self.out_features {
            let mut acc = 0.0f32;
            for i in 0..self.in_features {
                acc += w[o * self.in_features + i] * x[i];
            }
            if self.has_bias {
                if let Some(b) = &self.bias {
                    acc += b[o];
                }
            }
            out.push(acc);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSpec {
    pub inner: Vec<Layer>,
    /// Projection applied to the (delayed) input; empty for identity skips.
    pub skip: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv3d(ConvSpec),
    Pool(PoolSpec),
    /// Average or max over the full spatial extent and a temporal window.
    GlobalPool {
        kind: PoolKind,
        temporal_kernel: usize,
    },
    Activation(Activation),
    Norm(NormSpec),
    Se(SeSpec),
    Linear(LinearSpec),
    Residual(ResidualSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

impl Layer {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input: FrameShape,
    /// Informational only; no resampling is performed.
    pub frame_rate: Option<f64>,
    /// Converted specs run without temporal padding and with spatial-only SE.
    pub continual: bool,
    pub layers: Vec<Layer>,
}

/// Aggregated temporal characteristics of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveSummary {
    /// Input frames influencing one output (r_T).
    pub receptive_field: usize,
    /// Declared temporal padding, aggregated with the same jump weighting.
    pub aggregate_padding: usize,
    /// Frames to process before steady operation: r_T - p_T - 1.
    pub transient_len: usize,
    /// Sum of per-layer emission delays, in input frames.
    pub total_delay: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct TemporalStats {
    r_minus_1: usize,
    padding: usize,
    delay: usize,
    jump: usize,
}

fn accumulate_dim(stats: &mut TemporalStats, dim: &DimSpec) {
    stats.r_minus_1 += (dim.kernel - 1) * dim.dilation * stats.jump;
    stats.padding += dim.padding * stats.jump;
    stats.delay += dim.dilation * (dim.kernel - 1).saturating_sub(dim.padding) * stats.jump;
    stats.jump *= dim.stride;
}

fn temporal_stats(layers: &[Layer], stats: &mut TemporalStats) -> Result<()> {
    for layer in layers {
        match &layer.kind {
            LayerKind::Conv3d(c) => accumulate_dim(stats, &c.temporal),
            LayerKind::Pool(p) => accumulate_dim(stats, &p.temporal),
            LayerKind::GlobalPool {
                temporal_kernel, ..
            } => accumulate_dim(stats, &DimSpec::plain(*temporal_kernel)),
            LayerKind::Residual(res) => {
                let mut inner = TemporalStats {
                    jump: 1,
                    ..TemporalStats::default()
                };
                temporal_stats(&res.inner, &mut inner)?;
                if inner.jump != 1 {
                    return Err(Error::Unconvertible(format!(
                        "residual block `{}` has temporal stride inside its inner path",
                        layer.name
                    )));
                }
                let mut skip = TemporalStats {
                    jump: 1,
                    ..TemporalStats::default()
                };
                temporal_stats(&res.skip, &mut skip)?;
                if skip.r_minus_1 != 0 || skip.jump != 1 {
                    return Err(Error::Unconvertible(format!(
                        "residual block `{}` has temporal extent in its skip path",
                        layer.name
                    )));
                }
                stats.r_minus_1 += inner.r_minus_1 * stats.jump;
                stats.padding += inner.padding * stats.jump;
                stats.delay += inner.delay * stats.jump;
            }
            LayerKind::Activation(_)
            | LayerKind::Norm(_)
            | LayerKind::Se(_)
            | LayerKind::Linear(_) => {}
        }
    }
    Ok(())
}

/// Receptive field, aggregated padding, transient length and total delay.
pub fn analyze(net: &NetworkSpec) -> Result<ReceptiveSummary> {
    let mut stats = TemporalStats {
        jump: 1,
        ..TemporalStats::default()
    };
    temporal_stats(&net.layers, &mut stats)?;
    let receptive = stats.r_minus_1 + 1;
    Ok(ReceptiveSummary {
        receptive_field: receptive,
        aggregate_padding: stats.padding,
        transient_len: (receptive - 1).saturating_sub(stats.padding),
        total_delay: stats.delay,
    })
}

/// Temporal stats of a residual inner path: (r_T - 1, aggregate delay).
pub(crate) fn inner_path_stats(res: &ResidualSpec) -> Result<(usize, usize)> {
    let mut inner = TemporalStats {
        jump: 1,
        ..TemporalStats::default()
    };
    temporal_stats(&res.inner, &mut inner)?;
    Ok((inner.r_minus_1, inner.delay))
}

impl NetworkSpec {
    pub fn new(input: FrameShape, layers: Vec<Layer>) -> Self {
        Self {
            input,
            frame_rate: None,
            continual: false,
            layers,
        }
    }

    /// Shape-check the whole layer chain and every layer's own invariants.
    pub fn validate(&self) -> Result<()> {
        let mut names = Vec::new();
        collect_names(&self.layers, &mut names);
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::Shape(format!("duplicate layer name `{a}`")));
            }
        }
        infer_shapes(&self.layers, self.input)?;
        analyze(self)?;
        Ok(())
    }

    pub fn output_features(&self) -> Result<usize> {
        let shape = infer_shapes(&self.layers, self.input)?;
        Ok(shape.channels)
    }

    /// Layers with declared temporal padding, for conversion warnings.
    pub fn declared_temporal_padding(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        fn walk(layers: &[Layer], out: &mut Vec<(String, usize)>) {
            for layer in layers {
                match &layer.kind {
                    LayerKind::Conv3d(c) if c.temporal.padding > 0 => {
                        out.push((layer.name.clone(), c.temporal.padding));
                    }
                    LayerKind::Pool(p) if p.temporal.padding > 0 => {
                        out.push((layer.name.clone(), p.temporal.padding));
                    }
                    LayerKind::Residual(res) => {
                        walk(&res.inner, out);
                        walk(&res.skip, out);
                    }
                    _ => {}
                }
            }
        }
        walk(&self.layers, &mut out);
        out
    }

    pub fn for_each_layer_mut(&mut self, f: &mut dyn FnMut(&mut Layer)) {
        fn walk(layers: &mut [Layer], f: &mut dyn FnMut(&mut Layer)) {
            for layer in layers {
                f(layer);
                if let LayerKind::Residual(res) = &mut layer.kind {
                    walk(&mut res.inner, f);
                    walk(&mut res.skip, f);
                }
            }
        }
        walk(&mut self.layers, f);
    }

    pub fn for_each_layer(&self, f: &mut dyn FnMut(&Layer)) {
        fn walk(layers: &[Layer], f: &mut dyn FnMut(&Layer)) {
            for layer in layers {
                f(layer);
                if let LayerKind::Residual(res) = &layer.kind {
                    walk(&res.inner, f);
                    walk(&res.skip, f);
                }
            }
        }
        walk(&self.layers, f);
    }
}

fn collect_names(layers: &[Layer], out: &mut Vec<String>) {
    for layer in layers {
        out.push(layer.name.clone());
        if let LayerKind::Residual(res) = &layer.kind {
            collect_names(&res.inner, out);
            collect_names(&res.skip, out);
        }
    }
}

/// Walk the layer chain computing per-frame output shapes; returns the
/// final shape.
pub(crate) fn infer_shapes(layers: &[Layer], input: FrameShape) -> Result<FrameShape> {
    let mut cur = input;
    for layer in layers {
        cur = layer_out_shape(layer, cur)?;
    }
    Ok(cur)
}

pub(crate) fn layer_out_shape(layer: &Layer, cur: FrameShape) -> Result<FrameShape> {
    let named = |e: Error| match e {
        Error::Shape(msg) => Error::Shape(format!("layer `{}`: {msg}", layer.name)),
        other => other,
    };
    match &layer.kind {
        LayerKind::Conv3d(c) => {
            c.validate().map_err(named)?;
            if c.in_channels != cur.channels {
                return Err(Error::Shape(format!(
                    "layer `{}` expects {} input channels, got {}",
                    layer.name, c.in_channels, cur.channels
                )));
            }
            let (h, w) = c.spatial_out(cur.height, cur.width).map_err(named)?;
            Ok(FrameShape {
                channels: c.out_channels,
                height: h,
                width: w,
            })
        }
        LayerKind::Pool(p) => {
            p.validate().map_err(named)?;
            let (h, w) = p.spatial_out(cur.height, cur.width).map_err(named)?;
            Ok(FrameShape {
                channels: cur.channels,
                height: h,
                width: w,
            })
        }
        LayerKind::GlobalPool { .. } => Ok(FrameShape {
            channels: cur.channels,
            height: 1,
            width: 1,
        }),
        LayerKind::Activation(_) => Ok(cur),
        LayerKind::Norm(n) => {
            n.validate().map_err(named)?;
            if n.channels() != cur.channels {
                return Err(Error::Shape(format!(
                    "layer `{}` normalizes {} channels, got {}",
                    layer.name,
                    n.channels(),
                    cur.channels
                )));
            }
            Ok(cur)
        }
        LayerKind::Se(s) => {
            s.validate().map_err(named)?;
            if s.channels != cur.channels {
                return Err(Error::Shape(format!(
                    "layer `{}` gates {} channels, got {}",
                    layer.name, s.channels, cur.channels
                )));
            }
            Ok(cur)
        }
        LayerKind::Linear(l) => {
            l.validate().map_err(named)?;
            if cur.height != 1 || cur.width != 1 {
                return Err(Error::Shape(format!(
                    "layer `{}` requires pooled 1x1 input, got {}x{}",
                    layer.name, cur.height, cur.width
                )));
            }
            if l.in_features != cur.channels {
                return Err(Error::Shape(format!(
                    "layer `{}` expects {} features, got {}",
                    layer.name, l.in_features, cur.channels
                )));
            }
            Ok(FrameShape {
                channels: l.out_features,
                height: 1,
                width: 1,
            })
        }
        LayerKind::Residual(res) => {
            let inner = infer_shapes(&res.inner, cur)?;
            let skip = infer_shapes(&res.skip, cur)?;
            if inner != skip {
                return Err(Error::Shape(format!(
                    "layer `{}`: inner path yields {:?} but skip path yields {:?}",
                    layer.name, inner, skip
                )));
            }
            Ok(inner)
        }
    }
}

/// Rewrite a clip-wise spec for frame-by-frame execution.
///
/// Declared temporal padding is kept on the layers (it drives delay and
/// validity bookkeeping) but will no longer be applied to the data. SE
/// blocks become spatial-only. Weights are carried over untouched.
/// `global_pool_temporal` optionally enlarges the final global pool's
/// temporal kernel, extending the receptive field at negligible cost.
pub fn convert_to_continual_with(
    net: &NetworkSpec,
    global_pool_temporal: Option<usize>,
) -> Result<NetworkSpec> {
    net.validate()?;
    // Validation inside analyze() already rejects inner temporal strides
    // and temporally non-trivial skip paths.
    let mut out = net.clone();
    out.continual = true;
    out.for_each_layer_mut(&mut |layer| {
        if let LayerKind::Se(se) = &mut layer.kind {
            se.temporal_pool = false;
        }
    });
    if let Some(k) = global_pool_temporal {
        if k == 0 {
            return Err(Error::Shape(
                "global pool temporal kernel must be >= 1".into(),
            ));
        }
        let mut last: Option<&mut Layer> = None;
        for layer in out.layers.iter_mut() {
            if matches!(layer.kind, LayerKind::GlobalPool { .. }) {
                last = Some(layer);
            }
        }
        match last {
            Some(layer) => {
                if let LayerKind::GlobalPool {
                    temporal_kernel, ..
                } = &mut layer.kind
                {
                    *temporal_kernel = k;
                }
            }
            None => {
                return Err(Error::Unconvertible(
                    "no global pool layer to apply the extended temporal kernel to".into(),
                ))
            }
        }
    }
    Ok(out)
}

pub fn convert_to_continual(net: &NetworkSpec) -> Result<NetworkSpec> {
    convert_to_continual_with(net, None)
}

/// Clip-wise execution keeping every temporal position: the dense oracle.
/// With `net.continual` set, temporal padding is omitted and SE gates are
/// spatial-only, so output position `j` is the prediction for the window
/// ending at input frame `j + r_T - 1`.
pub fn forward_clip_dense(net: &NetworkSpec, clip: &ClipTensor) -> Result<ClipTensor> {
    if clip.channels() != net.input.channels
        || clip.height() != net.input.height
        || clip.width() != net.input.width
    {
        return Err(Error::Shape(format!(
            "clip shape {:?} does not match network input {:?}",
            clip.shape(),
            net.input
        )));
    }
    run_layers_clip(&net.layers, clip, !net.continual)
}

fn run_layers_clip(layers: &[Layer], clip: &ClipTensor, apply_tpad: bool) -> Result<ClipTensor> {
    let mut cur = clip.clone();
    for layer in layers {
        cur = run_layer_clip(layer, &cur, apply_tpad)?;
    }
    Ok(cur)
}

/// Dense execution keeping every top-level layer's full output, for
/// divergence diagnostics. Memory scales with the sum of all feature maps.
pub fn forward_clip_dense_traced(
    net: &NetworkSpec,
    clip: &ClipTensor,
) -> Result<Vec<(String, ClipTensor)>> {
    let mut cur = clip.clone();
    let mut out = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        cur = run_layer_clip(layer, &cur, !net.continual)?;
        out.push((layer.name.clone(), cur.clone()));
    }
    Ok(out)
}

fn run_layer_clip(layer: &Layer, clip: &ClipTensor, apply_tpad: bool) -> Result<ClipTensor> {
    match &layer.kind {
        LayerKind::Conv3d(c) => conv3d(clip, c, apply_tpad),
        LayerKind::Pool(p) => pool3d(clip, p, apply_tpad),
        LayerKind::GlobalPool {
            kind,
            temporal_kernel,
        } => {
            let spec = PoolSpec {
                kind: *kind,
                temporal: DimSpec::plain(*temporal_kernel),
                spatial: PoolSpatial::Global,
            };
            pool3d(clip, &spec, apply_tpad)
        }
        LayerKind::Activation(a) => Ok(a.apply_clip(clip)),
        LayerKind::Norm(n) => norm_infer_clip(clip, n),
        LayerKind::Se(s) => se_clip(clip, s),
        LayerKind::Linear(l) => {
            if clip.height() != 1 || clip.width() != 1 {
                return Err(Error::Shape(format!(
                    "layer `{}` requires pooled 1x1 input",
                    layer.name
                )));
            }
            let mut frames = Vec::with_capacity(clip.time());
            for t in 0..clip.time() {
                let x: Vec<f32> = (0..clip.channels()).map(|c| clip.at(c, t, 0, 0)).collect();
                let y = l.apply_vec(&x)?;
                frames.push(crate::tensor::FrameTensor::new(l.out_features, 1, 1, y)?);
            }
            ClipTensor::from_frames(&frames)
        }
        LayerKind::Residual(res) => {
            let inner = run_layers_clip(&res.inner, clip, apply_tpad)?;
            if apply_tpad {
                let skip = run_layers_clip(&res.skip, clip, apply_tpad)?;
                add_clips(&inner, &skip, &layer.name)
            } else {
                // Without temporal padding the inner path shrinks; the skip
                // must be sliced to the frames each window is aligned to.
                let (r_minus_1, delay) = inner_path_stats(res)?;
                let offset = r_minus_1 - delay;
                let len = inner.time();
                let sliced = clip.time_slice(offset, len)?;
                let skip = run_layers_clip(&res.skip, &sliced, apply_tpad)?;
                add_clips(&inner, &skip, &layer.name)
            }
        }
    }
}

fn add_clips(a: &ClipTensor, b: &ClipTensor, name: &str) -> Result<ClipTensor> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "residual `{name}`: inner shape {:?} != skip shape {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = a.clone();
    for (o, v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += *v;
    }
    Ok(out)
}

/// Clip-wise inference collapsed to a single prediction vector: the logits
/// at the last remaining temporal position.
pub fn forward_clip(net: &NetworkSpec, clip: &ClipTensor) -> Result<Vec<f32>> {
    let summary = analyze(net)?;
    let needed = summary.receptive_field.saturating_sub(if net.continual {
        0
    } else {
        summary.aggregate_padding * 2
    });
    if clip.time() < needed {
        return Err(Error::InsufficientFrames {
            needed,
            got: clip.time(),
        });
    }
    let dense = forward_clip_dense(net, clip)?;
    let last = dense.time() - 1;
    let mut out = Vec::with_capacity(dense.channels());
    for c in 0..dense.channels() {
        out.push(dense.at(c, last, 0, 0));
    }
    Ok(out)
}

/// Fill every parameter tensor with seeded uniform noise.
///
/// Convolutions and linear layers draw from U(-a, a) with a = 1/sqrt(fan_in)
/// and biases from U(-0.05, 0.05). Normalization layers get unit-order
/// random scale and variance with zero running mean and shift, which keeps
/// a freshly seeded network zero-preserving: a zero frame stays zero
/// through every layer, matching the zero state the streaming runtime
/// starts from.
pub fn seed_weights(net: &mut NetworkSpec, seed: u64) {
    let mut rng = SplitMix64::new(seed);
    net.for_each_layer_mut(&mut |layer| match &mut layer.kind {
        LayerKind::Conv3d(c) => {
            let fan_in = (c.in_channels / c.groups)
                * c.temporal.kernel
                * c.spatial_h.kernel
                * c.spatial_w.kernel;
            let a = 1.0 / libm::sqrtf(fan_in as f32);
            let len = c.weight_len();
            c.weights = Some((0..len).map(|_| rng.uniform(-a, a)).collect());
            if c.has_bias {
                c.bias = Some(
                    (0..c.out_channels)
                        .map(|_| rng.uniform(-0.05, 0.05))
                        .collect(),
                );
            }
        }
        LayerKind::Norm(n) => {
            for v in n.scale.iter_mut() {
                *v = rng.uniform(0.5, 1.5);
            }
            for v in n.var.iter_mut() {
                *v = rng.uniform(0.5, 1.5);
            }
            for v in n.mean.iter_mut() {
                *v = 0.0;
            }
            for v in n.shift.iter_mut() {
                *v = 0.0;
            }
        }
        LayerKind::Se(s) => {
            let a1 = 1.0 / libm::sqrtf(s.channels as f32);
            let a2 = 1.0 / libm::sqrtf(s.hidden as f32);
            s.w1 = Some(
                (0..s.hidden * s.channels)
                    .map(|_| rng.uniform(-a1, a1))
                    .collect(),
            );
            s.b1 = Some((0..s.hidden).map(|_| rng.uniform(-0.1, 0.1)).collect());
            s.w2 = Some(
                (0..s.channels * s.hidden)
                    .map(|_| rng.uniform(-a2, a2))
                    .collect(),
            );
            s.b2 = Some((0..s.channels).map(|_| rng.uniform(-0.1, 0.1)).collect());
        }
        LayerKind::Linear(l) => {
            let a = 1.0 / libm::sqrtf(l.in_features as f32);
            l.weights = Some(
                (0..l.in_features * l.out_features)
                    .map(|_| rng.uniform(-a, a))
                    .collect(),
            );
            if l.has_bias {
                l.bias = Some(
                    (0..l.out_features)
                        .map(|_| rng.uniform(-0.05, 0.05))
                        .collect(),
                );
            }
        }
        _ => {}
    });
}
