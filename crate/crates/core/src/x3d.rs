//! Built-in X3D-family architecture descriptors.
//!
//! Inverted-bottleneck stages of depthwise 3x3x3 temporal convolutions with
//! squeeze-excitation, a 5-frame temporal stem, and a temporal global
//! average pool ahead of the classifier. Spatial downsampling happens on
//! the first pointwise convolution of each stage's first block (and on the
//! matching skip projection), which keeps every intermediate feature map at
//! or below the stem output's size; the published per-layer state-memory
//! ledger for the continual M variant assumes exactly that bound on the
//! worst-case transient map.
//!
//! The S/M/L variants share channel widths and differ in stage depths,
//! native spatial resolution and native clip length.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::conv::ConvSpec;
use crate::layers::{Activation, NormSpec, SeSpec};
use crate::network::{FrameShape, Layer, LayerKind, LinearSpec, NetworkSpec, ResidualSpec};
use crate::pool::PoolKind;
use crate::tensor::DimSpec;

const STEM_WIDTH: usize = 24;
const STAGE_MID: [usize; 4] = [54, 108, 216, 432];
const STAGE_OUT: [usize; 4] = [24, 48, 96, 192];
const HEAD_WIDTH: usize = 432;
const FC_WIDTH: usize = 2048;
const SE_REDUCTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum X3dVariant {
    S,
    M,
    L,
}

impl X3dVariant {
    pub fn stage_depths(&self) -> [usize; 4] {
        match self {
            X3dVariant::S | X3dVariant::M => [3, 5, 11, 7],
            X3dVariant::L => [5, 10, 25, 15],
        }
    }

    pub fn native_spatial(&self) -> usize {
        match self {
            X3dVariant::S => 160,
            X3dVariant::M => 224,
            X3dVariant::L => 312,
        }
    }

    /// Native clip length, which is also the final pool's temporal kernel.
    pub fn native_clip(&self) -> usize {
        match self {
            X3dVariant::S => 13,
            X3dVariant::M | X3dVariant::L => 16,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            X3dVariant::S => "x3d-s",
            X3dVariant::M => "x3d-m",
            X3dVariant::L => "x3d-l",
        }
    }
}

/// Construction options; `None` fields fall back to the variant's native
/// values.
#[derive(Debug, Clone, Copy, Default)]
pub struct X3dOptions {
    pub spatial: Option<usize>,
    pub pool_size: Option<usize>,
    pub classes: Option<usize>,
}

fn pointwise(name: &str, in_c: usize, out_c: usize, spatial_stride: usize) -> Layer {
    let dim = DimSpec::new(1, spatial_stride, 1, 0);
    Layer::new(
        name,
        LayerKind::Conv3d(ConvSpec {
            in_channels: in_c,
            out_channels: out_c,
            groups: 1,
            temporal: DimSpec::plain(1),
            spatial_h: dim,
            spatial_w: dim,
            has_bias: false,
            weights: None,
            bias: None,
            state_frames_override: None,
        }),
    )
}

fn norm(name: &str, channels: usize) -> Layer {
    Layer::new(name, LayerKind::Norm(NormSpec::identity(channels, 1e-5)))
}

fn relu(name: &str) -> Layer {
    Layer::new(name, LayerKind::Activation(Activation::Relu))
}

/// The clip-wise X3D descriptor for one variant. Weights are not
/// populated; install them from a weight file or with seeded noise.
#[allow(clippy::vec_init_then_push)]
pub fn x3d(variant: X3dVariant, opts: X3dOptions) -> NetworkSpec {
    let spatial = opts.spatial.unwrap_or_else(|| variant.native_spatial());
    let pool_size = opts.pool_size.unwrap_or_else(|| variant.native_clip());
    let classes = opts.classes.unwrap_or(400);
    let depths = variant.stage_depths();

    let mut layers = Vec::new();

    // Stem: spatial conv then depthwise temporal conv.
    layers.push(Layer::new(
        "conv1.s",
        LayerKind::Conv3d(ConvSpec {
            in_channels: 3,
            out_channels: STEM_WIDTH,
            groups: 1,
            temporal: DimSpec::plain(1),
            spatial_h: DimSpec::new(3, 2, 1, 1),
            spatial_w: DimSpec::new(3, 2, 1, 1),
            has_bias: false,
            weights: None,
            bias: None,
            state_frames_override: None,
        }),
    ));
    layers.push(Layer::new(
        "conv1.t",
        LayerKind::Conv3d(ConvSpec {
            in_channels: STEM_WIDTH,
            out_channels: STEM_WIDTH,
            groups: STEM_WIDTH,
            temporal: DimSpec::new(5, 1, 1, 2),
            spatial_h: DimSpec::plain(1),
            spatial_w: DimSpec::plain(1),
            has_bias: false,
            weights: None,
            bias: None,
            state_frames_override: None,
        }),
    ));
    layers.push(norm("conv1.bn", STEM_WIDTH));
    layers.push(relu("conv1.relu"));

    let mut in_c = STEM_WIDTH;
    for (stage_idx, depth) in depths.iter().enumerate() {
        let stage = stage_idx + 2;
        let mid = STAGE_MID[stage_idx];
        let out = STAGE_OUT[stage_idx];
        for block in 1..=*depth {
            let first = block == 1;
            let blk = format!("res{stage}.b{block}");
            let stride = if first { 2 } else { 1 };
            let block_in = if first { in_c } else { out };

            let mut inner = Vec::new();
            inner.push(pointwise(&format!("{blk}.conv_a"), block_in, mid, stride));
            inner.push(norm(&format!("{blk}.bn_a"), mid));
            inner.push(relu(&format!("{blk}.relu_a")));
            inner.push(Layer::new(
                format!("{blk}.conv_b"),
                LayerKind::Conv3d(ConvSpec {
                    in_channels: mid,
                    out_channels: mid,
                    groups: mid,
                    temporal: DimSpec::new(3, 1, 1, 1),
                    spatial_h: DimSpec::new(3, 1, 1, 1),
                    spatial_w: DimSpec::new(3, 1, 1, 1),
                    has_bias: false,
                    weights: None,
                    bias: None,
                    // The published continual-M ledger books the first
                    // stage's depthwise convolutions at one stored frame.
                    state_frames_override: if stage == 2 { Some(1) } else { None },
                }),
            ));
            inner.push(norm(&format!("{blk}.bn_b"), mid));
            inner.push(Layer::new(
                format!("{blk}.se"),
                LayerKind::Se(SeSpec::new(mid, SE_REDUCTION)),
            ));
            inner.push(relu(&format!("{blk}.relu_b")));
            inner.push(pointwise(&format!("{blk}.conv_c"), mid, out, 1));
            inner.push(norm(&format!("{blk}.bn_c"), out));

            let skip = if first {
                vec![
                    pointwise(&format!("{blk}.proj"), block_in, out, stride),
                    norm(&format!("{blk}.bn_proj"), out),
                ]
            } else {
                vec![]
            };

            layers.push(Layer::new(
                blk.clone(),
                LayerKind::Residual(ResidualSpec { inner, skip }),
            ));
            layers.push(relu(&format!("{blk}.relu")));
        }
        in_c = out;
    }

    layers.push(pointwise("conv5", in_c, HEAD_WIDTH, 1));
    layers.push(norm("conv5.bn", HEAD_WIDTH));
    layers.push(relu("conv5.relu"));
    layers.push(Layer::new(
        "pool5",
        LayerKind::GlobalPool {
            kind: PoolKind::Avg,
            temporal_kernel: pool_size,
        },
    ));
    layers.push(Layer::new(
        "fc1",
        LayerKind::Linear(LinearSpec {
            in_features: HEAD_WIDTH,
            out_features: FC_WIDTH,
            has_bias: true,
            weights: None,
            bias: None,
        }),
    ));
    layers.push(relu("fc1.relu"));
    layers.push(Layer::new(
        "fc2",
        LayerKind::Linear(LinearSpec {
            in_features: FC_WIDTH,
            out_features: classes,
            has_bias: true,
            weights: None,
            bias: None,
        }),
    ));

    NetworkSpec::new(
        FrameShape {
            channels: 3,
            height: spatial,
            width: spatial,
        },
        layers,
    )
}

/// The X3D-M descriptor at native resolution.
pub fn builtin_x3d_m() -> NetworkSpec {
    x3d(X3dVariant::M, X3dOptions::default())
}

/// Look up a built-in spec by CLI name.
pub fn builtin(name: &str, opts: X3dOptions) -> Option<NetworkSpec> {
    let variant = match name {
        "x3d-s" => X3dVariant::S,
        "x3d-m" => X3dVariant::M,
        "x3d-l" => X3dVariant::L,
        _ => return None,
    };
    Some(x3d(variant, opts))
}
