//! Exact cost accounting: FLOPs per clip and per frame, state memory,
//! transient memory, and delays, per layer and in total.
//!
//! Counting conventions. One multiply-accumulate is one FLOP by default
//! (configurable); a convolution with bias costs `(k_h*k_w*k_t + 1)` MACs
//! per input-channel/output-element pair. Linear layers and the SE gate
//! projections count as 1x1x1 convolutions. Activations, normalization,
//! residual adds and the SE scaling count one elementwise op per element
//! and are reported separately from the MAC totals, as are pooling
//! aggregations. Memory is counted in floats.
//!
//! Clip mode models a regular network applied to a sliding window: the
//! prior `m_T - 1` input frames must be cached between steps and the
//! largest per-layer feature map of `c_o * n_h * n_w * n_t` floats exists
//! transiently. Continual mode holds ring/delay state of
//! `d_T*(k_T-1)*c_o*n_h*n_w` per temporal conv (unless the layer carries a
//! reported-state override), the matched delay times the input frame per
//! residual skip, `(k_T-1)` pooled maps per temporal pool, and its
//! transient shrinks to one frame per layer.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::conv::ConvSpec;
use crate::error::{Error, Result};
use crate::network::{
    analyze, infer_shapes, layer_out_shape, FrameShape, Layer, LayerKind, NetworkSpec,
    ReceptiveSummary,
};
use crate::pool::{PoolSpatial, PoolSpec};
use crate::tensor::{output_size, DimSpec};

/// How abstract operation counts translate to reported FLOPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopConvention {
    /// FLOPs charged per multiply-accumulate (1 or 2).
    pub flops_per_mac: u64,
    /// Whether bias enters the per-element kernel cost.
    pub count_bias: bool,
}

impl Default for FlopConvention {
    fn default() -> Self {
        Self {
            flops_per_mac: 1,
            count_bias: true,
        }
    }
}

/// FLOPs of one convolution over a whole clip with output (n_t, n_h, n_w).
pub fn conv_flops_clip(spec: &ConvSpec, out: (usize, usize, usize), conv: &FlopConvention) -> u64 {
    conv_flops_frame(spec, (out.1, out.2), conv) * out.0 as u64
}

/// FLOPs of one convolution for a single output frame of (n_h, n_w).
pub fn conv_flops_frame(spec: &ConvSpec, out: (usize, usize), conv: &FlopConvention) -> u64 {
    let b = if conv.count_bias && spec.has_bias {
        1
    } else {
        0
    };
    let kernel = (spec.temporal.kernel * spec.spatial_h.kernel * spec.spatial_w.kernel) as u64 + b;
    kernel
        * (spec.in_channels / spec.groups) as u64
        * spec.out_channels as u64
        * (out.0 * out.1) as u64
        * conv.flops_per_mac
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Conv,
    Pool,
    GlobalPool,
    Norm,
    Activation,
    Se,
    Linear,
    /// A residual block's skip delay line and join.
    Residual,
}

impl RowKind {
    pub fn label(&self) -> &'static str {
        match self {
            RowKind::Conv => "conv",
            RowKind::Pool => "pool",
            RowKind::GlobalPool => "global_pool",
            RowKind::Norm => "norm",
            RowKind::Activation => "activation",
            RowKind::Se => "se",
            RowKind::Linear => "linear",
            RowKind::Residual => "residual",
        }
    }
}

/// Per-layer cost accounting.
#[derive(Debug, Clone)]
pub struct CostRow {
    pub name: String,
    pub stage: String,
    pub kind: RowKind,
    pub macs_clip: u64,
    pub macs_frame: u64,
    pub elementwise_clip: u64,
    pub elementwise_frame: u64,
    pub pool_ops_clip: u64,
    pub pool_ops_frame: u64,
    /// Floats retained between steps in continual mode (override-aware).
    pub state_floats: u64,
    /// Ring/queue floats actually held by the compiled runtime.
    pub state_floats_measured: u64,
    pub state_expression: String,
    /// One output frame, the continual-mode transient.
    pub transient_frame_floats: u64,
    /// Full output feature map in clip mode.
    pub transient_clip_floats: u64,
    pub delay_frames: u64,
    /// Temporal output extent in clip mode.
    pub temporal_out: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    Clip,
    Continual,
}

/// Complete cost report for one network at one clip size.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub mode: CostMode,
    pub clip_size: usize,
    pub convention: FlopConvention,
    pub rows: Vec<CostRow>,
    pub summary: ReceptiveSummary,
    /// Eq-style input cache for clip mode: c_in * m_h * m_w * (m_t - 1).
    pub frame_cache_floats: u64,
    pub state_total: u64,
    pub state_total_measured: u64,
    pub max_transient_continual: u64,
    pub max_transient_clip: u64,
    pub macs_clip: u64,
    pub macs_frame: u64,
    pub elementwise_clip: u64,
    pub elementwise_frame: u64,
    pub pool_ops_clip: u64,
    pub pool_ops_frame: u64,
}

impl CostReport {
    /// State plus the largest transient (plus the frame cache in clip mode).
    pub fn worst_case_floats(&self) -> u64 {
        match self.mode {
            CostMode::Clip => self.frame_cache_floats + self.max_transient_clip,
            CostMode::Continual => self.state_total + self.max_transient_continual,
        }
    }

    pub fn worst_case_continual(&self) -> u64 {
        self.state_total + self.max_transient_continual
    }

    pub fn worst_case_clip(&self) -> u64 {
        self.frame_cache_floats + self.max_transient_clip
    }

    /// Headline FLOPs per prediction in the report's mode: the MAC total.
    pub fn flops_per_prediction(&self) -> u64 {
        match self.mode {
            CostMode::Clip => self.macs_clip,
            CostMode::Continual => self.macs_frame,
        }
    }

    /// MAC plus elementwise plus pooling ops, the measured-counter style.
    pub fn flops_per_prediction_total(&self) -> u64 {
        match self.mode {
            CostMode::Clip => self.macs_clip + self.elementwise_clip + self.pool_ops_clip,
            CostMode::Continual => self.macs_frame + self.elementwise_frame + self.pool_ops_frame,
        }
    }

    /// Share of continual state memory held by residual delay lines.
    pub fn residual_fraction(&self) -> f64 {
        if self.state_total == 0 {
            return 0.0;
        }
        let residual: u64 = self
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Residual)
            .map(|r| r.state_floats)
            .sum();
        residual as f64 / self.state_total as f64
    }

    /// Share of continual state memory held by temporal pooling rings.
    pub fn pool_fraction(&self) -> f64 {
        if self.state_total == 0 {
            return 0.0;
        }
        let pool: u64 = self
            .rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::Pool | RowKind::GlobalPool))
            .map(|r| r.state_floats)
            .sum();
        pool as f64 / self.state_total as f64
    }
}

/// Share of continual state memory attributable to residual delay lines.
pub fn residual_fraction(report: &CostReport) -> f64 {
    report.residual_fraction()
}

fn with_pool_size(net: &NetworkSpec, clip_size: usize) -> NetworkSpec {
    let mut out = net.clone();
    let mut last: Option<&mut Layer> = None;
    for layer in out.layers.iter_mut() {
        if matches!(layer.kind, LayerKind::GlobalPool { .. }) {
            last = Some(layer);
        }
    }
    if let Some(layer) = last {
        if let LayerKind::GlobalPool {
            temporal_kernel, ..
        } = &mut layer.kind
        {
            *temporal_kernel = clip_size;
        }
    }
    out
}

struct Walker<'a> {
    conv: &'a FlopConvention,
    rows: Vec<CostRow>,
    /// Set when the clip-wise temporal chain degenerates at some layer;
    /// clip columns are zero from that point on.
    clip_chain_broken: bool,
}

fn stage_of(name: &str) -> String {
    name.split('.').next().unwrap_or(name).to_string()
}

/// Temporal output extent, or `None` once the chain has degenerated.
fn chain_t(t_in: Option<usize>, dim: &DimSpec) -> Option<usize> {
    t_in.and_then(|t| output_size(t, dim).ok())
}

impl<'a> Walker<'a> {
    /// Walk a layer list, returning (frame shape, clip temporal extent) at
    /// the end. `t_in` follows the padded clip-wise semantics.
    fn walk(
        &mut self,
        layers: &[Layer],
        mut shape: FrameShape,
        mut t_in: Option<usize>,
    ) -> Result<(FrameShape, Option<usize>)> {
        for layer in layers {
            let out_shape = layer_out_shape(layer, shape)?;
            let frame_floats = (out_shape.channels * out_shape.height * out_shape.width) as u64;
            match &layer.kind {
                LayerKind::Conv3d(c) => {
                    let n_t = chain_t(t_in, &c.temporal);
                    let macs_frame =
                        conv_flops_frame(c, (out_shape.height, out_shape.width), self.conv);
                    let reported_frames =
                        c.state_frames_override.unwrap_or_else(|| c.state_frames());
                    let state = (reported_frames as u64) * frame_floats;
                    let measured = (c.state_frames() as u64) * frame_floats;
                    self.rows.push(CostRow {
                        name: layer.name.clone(),
                        stage: stage_of(&layer.name),
                        kind: RowKind::Conv,
                        macs_clip: macs_frame * n_t.unwrap_or(0) as u64,
                        macs_frame,
                        elementwise_clip: 0,
                        elementwise_frame: 0,
                        pool_ops_clip: 0,
                        pool_ops_frame: 0,
                        state_floats: state,
                        state_floats_measured: measured,
                        state_expression: format!(
                            "{} x {} x {} x {}",
                            reported_frames, out_shape.channels, out_shape.height, out_shape.width
                        ),
                        transient_frame_floats: frame_floats,
                        transient_clip_floats: frame_floats * n_t.unwrap_or(0) as u64,
                        delay_frames: c.continual_delay() as u64,
                        temporal_out: n_t.unwrap_or(0) as u64,
                    });
                    t_in = n_t;
                }
                LayerKind::Pool(p) => {
                    let n_t = chain_t(t_in, &p.temporal);
                    self.push_pool_row(layer, p, shape, out_shape, t_in, n_t, RowKind::Pool);
                    t_in = n_t;
                }
                LayerKind::GlobalPool {
                    kind,
                    temporal_kernel,
                } => {
                    let spec = PoolSpec {
                        kind: *kind,
                        temporal: DimSpec::plain(*temporal_kernel),
                        spatial: PoolSpatial::Global,
                    };
                    let n_t = chain_t(t_in, &spec.temporal);
                    self.push_pool_row(
                        layer,
                        &spec,
                        shape,
                        out_shape,
                        t_in,
                        n_t,
                        RowKind::GlobalPool,
                    );
                    t_in = n_t;
                }
                LayerKind::Activation(_) | LayerKind::Norm(_) => {
                    let kind = if matches!(layer.kind, LayerKind::Norm(_)) {
                        RowKind::Norm
                    } else {
                        RowKind::Activation
                    };
                    let t = t_in.unwrap_or(0) as u64;
                    self.rows.push(CostRow {
                        name: layer.name.clone(),
                        stage: stage_of(&layer.name),
                        kind,
                        macs_clip: 0,
                        macs_frame: 0,
                        elementwise_clip: frame_floats * t,
                        elementwise_frame: frame_floats,
                        pool_ops_clip: 0,
                        pool_ops_frame: 0,
                        state_floats: 0,
                        state_floats_measured: 0,
                        state_expression: String::new(),
                        transient_frame_floats: frame_floats,
                        transient_clip_floats: frame_floats * t,
                        delay_frames: 0,
                        temporal_out: t,
                    });
                }
                LayerKind::Se(s) => {
                    let b = if self.conv.count_bias { 1u64 } else { 0 };
                    let gate_macs =
                        ((1 + b) * (s.channels * s.hidden) as u64) * 2 * self.conv.flops_per_mac;
                    let plane = (out_shape.height * out_shape.width) as u64;
                    let scale = s.channels as u64 * plane;
                    let t = t_in.unwrap_or(0) as u64;
                    self.rows.push(CostRow {
                        name: layer.name.clone(),
                        stage: stage_of(&layer.name),
                        kind: RowKind::Se,
                        // Clip-wise SE gates once per clip from the pooled volume.
                        macs_clip: gate_macs,
                        macs_frame: gate_macs,
                        elementwise_clip: s.channels as u64 + scale * t,
                        elementwise_frame: s.channels as u64 + scale,
                        pool_ops_clip: scale * t,
                        pool_ops_frame: scale,
                        state_floats: 0,
                        state_floats_measured: 0,
                        state_expression: String::new(),
                        transient_frame_floats: frame_floats,
                        transient_clip_floats: frame_floats * t,
                        delay_frames: 0,
                        temporal_out: t,
                    });
                }
                LayerKind::Linear(l) => {
                    let b = if self.conv.count_bias && l.has_bias {
                        1u64
                    } else {
                        0
                    };
                    let macs =
                        (1 + b) * (l.in_features * l.out_features) as u64 * self.conv.flops_per_mac;
                    let t = t_in.unwrap_or(0) as u64;
                    self.rows.push(CostRow {
                        name: layer.name.clone(),
                        stage: stage_of(&layer.name),
                        kind: RowKind::Linear,
                        macs_clip: macs * t,
                        macs_frame: macs,
                        elementwise_clip: 0,
                        elementwise_frame: 0,
                        pool_ops_clip: 0,
                        pool_ops_frame: 0,
                        state_floats: 0,
                        state_floats_measured: 0,
                        state_expression: String::new(),
                        transient_frame_floats: frame_floats,
                        transient_clip_floats: frame_floats * t,
                        delay_frames: 0,
                        temporal_out: t,
                    });
                }
                LayerKind::Residual(res) => {
                    let (_, delay) = crate::network::inner_path_stats(res)?;
                    let in_floats = (shape.channels * shape.height * shape.width) as u64;
                    let (inner_shape, inner_t) = self.walk(&res.inner, shape, t_in)?;
                    let (_, _) = self.walk(&res.skip, shape, t_in)?;
                    debug_assert_eq!(inner_shape, out_shape);
                    let state = delay as u64 * in_floats;
                    let t = inner_t.unwrap_or(0) as u64;
                    self.rows.push(CostRow {
                        name: layer.name.clone(),
                        stage: stage_of(&layer.name),
                        kind: RowKind::Residual,
                        macs_clip: 0,
                        macs_frame: 0,
                        elementwise_clip: frame_floats * t,
                        elementwise_frame: frame_floats,
                        pool_ops_clip: 0,
                        pool_ops_frame: 0,
                        state_floats: state,
                        state_floats_measured: state,
                        state_expression: format!(
                            "{} x {} x {} x {}",
                            delay, shape.channels, shape.height, shape.width
                        ),
                        transient_frame_floats: frame_floats,
                        transient_clip_floats: frame_floats * t,
                        delay_frames: delay as u64,
                        temporal_out: t,
                    });
                    t_in = inner_t;
                }
            }
            if t_in.is_none() {
                self.clip_chain_broken = true;
            }
            shape = out_shape;
        }
        Ok((shape, t_in))
    }

    #[allow(clippy::too_many_arguments)]
    fn push_pool_row(
        &mut self,
        layer: &Layer,
        spec: &PoolSpec,
        in_shape: FrameShape,
        out_shape: FrameShape,
        t_in: Option<usize>,
        n_t: Option<usize>,
        kind: RowKind,
    ) {
        let frame_floats = (out_shape.channels * out_shape.height * out_shape.width) as u64;
        // One aggregation op per element read.
        let spatial_ops_frame = match &spec.spatial {
            PoolSpatial::Global => (in_shape.channels * in_shape.height * in_shape.width) as u64,
            PoolSpatial::Windowed { h, w } => frame_floats * (h.kernel * w.kernel) as u64,
        };
        let temporal_ops_frame = frame_floats * spec.temporal.kernel as u64;
        let pool_ops_frame = spatial_ops_frame + temporal_ops_frame;
        let state = spec.state_frames() as u64 * frame_floats;
        self.rows.push(CostRow {
            name: layer.name.clone(),
            stage: stage_of(&layer.name),
            kind,
            macs_clip: 0,
            macs_frame: 0,
            elementwise_clip: 0,
            elementwise_frame: 0,
            pool_ops_clip: spatial_ops_frame * t_in.unwrap_or(0) as u64
                + temporal_ops_frame * n_t.unwrap_or(0) as u64,
            pool_ops_frame,
            state_floats: state,
            state_floats_measured: state,
            state_expression: format!(
                "{} x {} x {} x {}",
                spec.state_frames(),
                out_shape.channels,
                out_shape.height,
                out_shape.width
            ),
            transient_frame_floats: frame_floats,
            transient_clip_floats: frame_floats * n_t.unwrap_or(0) as u64,
            delay_frames: spec.continual_delay() as u64,
            temporal_out: n_t.unwrap_or(0) as u64,
        });
    }
}

/// Build the full cost report for `net` at `clip_size` input frames.
///
/// The report carries both clip-wise and continual columns; `mode` selects
/// which worst-case and FLOP totals the accessors report. `clip_size`
/// overrides the final global pool's temporal kernel, matching how clip
/// size variants of an architecture are defined.
pub fn cost_report(
    net: &NetworkSpec,
    mode: CostMode,
    clip_size: usize,
    convention: FlopConvention,
) -> Result<CostReport> {
    if clip_size == 0 {
        return Err(Error::Shape("clip size must be >= 1".into()));
    }
    let sized = with_pool_size(net, clip_size);
    sized.validate()?;
    let summary = analyze(&sized)?;
    infer_shapes(&sized.layers, sized.input)?;

    let mut walker = Walker {
        conv: &convention,
        rows: Vec::new(),
        clip_chain_broken: false,
    };
    walker.walk(&sized.layers, sized.input, Some(clip_size))?;
    if mode == CostMode::Clip && walker.clip_chain_broken {
        return Err(Error::InsufficientFrames {
            needed: analyze(&sized)?.receptive_field,
            got: clip_size,
        });
    }
    let rows = walker.rows;

    let input_floats = (sized.input.channels * sized.input.height * sized.input.width) as u64;
    let frame_cache_floats = input_floats * (clip_size as u64 - 1);

    let state_total: u64 = rows.iter().map(|r| r.state_floats).sum();
    let state_total_measured: u64 = rows.iter().map(|r| r.state_floats_measured).sum();
    let max_transient_continual = rows
        .iter()
        .map(|r| r.transient_frame_floats)
        .max()
        .unwrap_or(0);
    let max_transient_clip = rows
        .iter()
        .map(|r| r.transient_clip_floats)
        .max()
        .unwrap_or(0);

    Ok(CostReport {
        mode,
        clip_size,
        convention,
        summary,
        frame_cache_floats,
        state_total,
        state_total_measured,
        max_transient_continual,
        max_transient_clip,
        macs_clip: rows.iter().map(|r| r.macs_clip).sum(),
        macs_frame: rows.iter().map(|r| r.macs_frame).sum(),
        elementwise_clip: rows.iter().map(|r| r.elementwise_clip).sum(),
        elementwise_frame: rows.iter().map(|r| r.elementwise_frame).sum(),
        pool_ops_clip: rows.iter().map(|r| r.pool_ops_clip).sum(),
        pool_ops_frame: rows.iter().map(|r| r.pool_ops_frame).sum(),
        rows,
    })
}

/// Cost report with the default FLOP convention.
pub fn memory_report(net: &NetworkSpec, mode: CostMode, clip_size: usize) -> Result<CostReport> {
    cost_report(net, mode, clip_size, FlopConvention::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::CoConv;
    use crate::network::{Layer, LayerKind, NetworkSpec};
    use crate::pool::PoolKind;
    use alloc::vec;

    fn shape(c: usize, h: usize, w: usize) -> FrameShape {
        FrameShape {
            channels: c,
            height: h,
            width: w,
        }
    }

    #[test]
    fn single_mac_for_pointwise_conv() {
        let spec = ConvSpec {
            in_channels: 1,
            out_channels: 1,
            groups: 1,
            temporal: DimSpec::plain(1),
            spatial_h: DimSpec::plain(1),
            spatial_w: DimSpec::plain(1),
            has_bias: false,
            weights: None,
            bias: None,
            state_frames_override: None,
        };
        assert_eq!(
            conv_flops_clip(&spec, (1, 1, 1), &FlopConvention::default()),
            1
        );
    }

    #[test]
    fn repeated_1d_case_counts_six_macs() {
        // k_T=2, single channel, three temporal outputs at 1x1.
        let spec = CoConv::temporal_1d(&[1.0, 1.0], 1, 1, 0);
        assert_eq!(
            conv_flops_clip(&spec, (3, 1, 1), &FlopConvention::default()),
            6
        );
    }

    #[test]
    fn clip_to_frame_ratio_is_temporal_extent() {
        let spec = ConvSpec {
            in_channels: 4,
            out_channels: 8,
            groups: 2,
            temporal: DimSpec::new(3, 1, 1, 1),
            spatial_h: DimSpec::new(3, 1, 1, 1),
            spatial_w: DimSpec::new(3, 1, 1, 1),
            has_bias: true,
            weights: None,
            bias: None,
            state_frames_override: None,
        };
        let conv = FlopConvention::default();
        let frame = conv_flops_frame(&spec, (7, 9), &conv);
        for n_t in [1usize, 4, 16] {
            assert_eq!(
                conv_flops_clip(&spec, (n_t, 7, 9), &conv),
                frame * n_t as u64
            );
        }
    }

    #[test]
    fn empty_net_reports_zero_state_and_delay() {
        let net = NetworkSpec::new(
            shape(3, 4, 4),
            vec![
                Layer::new(
                    "pool",
                    LayerKind::GlobalPool {
                        kind: PoolKind::Avg,
                        temporal_kernel: 1,
                    },
                ),
                Layer::new(
                    "head",
                    LayerKind::Linear(crate::network::LinearSpec {
                        in_features: 3,
                        out_features: 2,
                        has_bias: false,
                        weights: None,
                        bias: None,
                    }),
                ),
            ],
        );
        let report = memory_report(&net, CostMode::Continual, 1).unwrap();
        assert_eq!(report.state_total, 0);
        assert_eq!(report.summary.total_delay, 0);
        assert_eq!(report.residual_fraction(), 0.0);
    }

    #[test]
    fn residual_fraction_of_pure_delay_net() {
        let res = crate::network::ResidualSpec {
            inner: vec![Layer::new(
                "inner",
                LayerKind::Conv3d(CoConv::temporal_1d(&[1.0, 1.0], 1, 1, 1)),
            )],
            skip: vec![],
        };
        let net = NetworkSpec::new(
            shape(1, 1, 1),
            vec![Layer::new("res", LayerKind::Residual(res))],
        );
        // Inner conv k=2 p=1: delay 0; make delay 1 via an unpadded kernel.
        let res2 = crate::network::ResidualSpec {
            inner: vec![Layer::new(
                "inner2",
                LayerKind::Conv3d(CoConv::temporal_1d(&[1.0, 1.0], 1, 1, 0)),
            )],
            skip: vec![],
        };
        let net2 = NetworkSpec::new(
            shape(1, 1, 1),
            vec![Layer::new("res2", LayerKind::Residual(res2))],
        );
        let r1 = memory_report(&net, CostMode::Continual, 4).unwrap();
        // k=2 with declared padding 1: delay 0, so no skip state; the ring
        // buffer of the inner conv is the only state.
        assert_eq!(
            r1.rows
                .iter()
                .find(|r| r.kind == RowKind::Residual)
                .unwrap()
                .state_floats,
            0
        );
        let r2 = memory_report(&net2, CostMode::Continual, 4).unwrap();
        // Unpadded k=2: delay 1 on a 1x1x1 input; inner ring holds 1 float.
        assert!((r2.residual_fraction() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn residual_fraction_is_one_when_only_delay_state_remains() {
        let mut inner_conv = CoConv::temporal_1d(&[1.0, 1.0], 1, 1, 0);
        inner_conv.state_frames_override = Some(0);
        let res = crate::network::ResidualSpec {
            inner: vec![Layer::new("inner", LayerKind::Conv3d(inner_conv))],
            skip: vec![],
        };
        let net = NetworkSpec::new(
            shape(1, 1, 1),
            vec![Layer::new("res", LayerKind::Residual(res))],
        );
        let report = memory_report(&net, CostMode::Continual, 4).unwrap();
        assert_eq!(report.state_total, 1);
        assert!((report.residual_fraction() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_size_only_moves_the_global_pool_row() {
        let net = NetworkSpec::new(
            shape(2, 4, 4),
            vec![
                Layer::new(
                    "conv",
                    LayerKind::Conv3d(ConvSpec {
                        in_channels: 2,
                        out_channels: 3,
                        groups: 1,
                        temporal: DimSpec::new(3, 1, 1, 1),
                        spatial_h: DimSpec::new(3, 1, 1, 1),
                        spatial_w: DimSpec::new(3, 1, 1, 1),
                        has_bias: false,
                        weights: None,
                        bias: None,
                        state_frames_override: None,
                    }),
                ),
                Layer::new(
                    "pool",
                    LayerKind::GlobalPool {
                        kind: PoolKind::Avg,
                        temporal_kernel: 8,
                    },
                ),
            ],
        );
        let r8 = memory_report(&net, CostMode::Continual, 8).unwrap();
        let r32 = memory_report(&net, CostMode::Continual, 32).unwrap();
        let pool_state = |r: &CostReport| {
            r.rows
                .iter()
                .find(|row| row.kind == RowKind::GlobalPool)
                .unwrap()
                .state_floats
        };
        assert_eq!(pool_state(&r8), 7 * 3);
        assert_eq!(pool_state(&r32), 31 * 3);
        assert_eq!(
            r8.state_total - pool_state(&r8),
            r32.state_total - pool_state(&r32)
        );
    }
}
