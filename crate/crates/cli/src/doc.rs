//! The on-disk network description: a strict JSON document listing layers
//! in execution order. Unknown fields are rejected so typos fail loudly,
//! and a parsed document converts to a runtime spec and back without loss.
//!
//! Channel counts are not spelled per layer; they chain from the input
//! shape through convolutions and linear layers, and the conversion
//! resolves them while it walks the list. Weights live in a separate
//! weight file keyed by layer name.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use coconv_core::conv::ConvSpec;
use coconv_core::layers::{Activation, NormSpec, SeSpec};
use coconv_core::network::{FrameShape, Layer, LayerKind, LinearSpec, NetworkSpec, ResidualSpec};
use coconv_core::pool::{PoolKind, PoolSpatial, PoolSpec};
use coconv_core::tensor::DimSpec;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub version: u32,
    #[serde(default, skip_serializing_if = "is_false")]
    pub continual: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate: Option<f64>,
    pub input: InputDoc,
    pub layers: Vec<LayerDoc>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDoc {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimDoc {
    pub kernel: usize,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub stride: usize,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub dilation: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub padding: usize,
}

fn one() -> usize {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl From<DimDoc> for DimSpec {
    fn from(d: DimDoc) -> Self {
        DimSpec::new(d.kernel, d.stride, d.dilation, d.padding)
    }
}

impl From<DimSpec> for DimDoc {
    fn from(d: DimSpec) -> Self {
        DimDoc {
            kernel: d.kernel,
            stride: d.stride,
            dilation: d.dilation,
            padding: d.padding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKindDoc {
    Avg,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationDoc {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerDoc {
    Conv3d {
        name: String,
        out_channels: usize,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        groups: usize,
        #[serde(default, skip_serializing_if = "is_false")]
        bias: bool,
        temporal: DimDoc,
        spatial_h: DimDoc,
        spatial_w: DimDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state_frames_override: Option<usize>,
    },
    Pool {
        name: String,
        pool: PoolKindDoc,
        temporal: DimDoc,
        spatial_h: DimDoc,
        spatial_w: DimDoc,
    },
    GlobalPool {
        name: String,
        pool: PoolKindDoc,
        temporal_kernel: usize,
    },
    Activation {
        name: String,
        function: ActivationDoc,
    },
    Norm {
        name: String,
        #[serde(default = "default_epsilon")]
        epsilon: f32,
    },
    Se {
        name: String,
        #[serde(default = "default_reduction")]
        reduction: usize,
    },
    Linear {
        name: String,
        out_features: usize,
        #[serde(default = "default_true", skip_serializing_if = "Clone::clone")]
        bias: bool,
    },
    ResidualBlock {
        name: String,
        inner: Vec<LayerDoc>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        skip: Vec<LayerDoc>,
    },
}

fn default_epsilon() -> f32 {
    1e-5
}

fn default_reduction() -> usize {
    16
}

fn default_true() -> bool {
    true
}

pub fn parse(json: &str) -> Result<SpecDocument> {
    let doc: SpecDocument = serde_json::from_str(json).context("parsing network spec")?;
    if doc.version != FORMAT_VERSION {
        bail!(
            "unsupported spec version {} (this build reads version {FORMAT_VERSION})",
            doc.version
        );
    }
    Ok(doc)
}

pub fn serialize(doc: &SpecDocument) -> Result<String> {
    serde_json::to_string_pretty(doc).context("serializing network spec")
}

/// Resolve a document into a runtime spec, chaining channel counts.
pub fn to_network(doc: &SpecDocument) -> Result<NetworkSpec> {
    let mut channels = doc.input.channels;
    let layers = convert_layers(&doc.layers, &mut channels)?;
    let mut net = NetworkSpec::new(
        FrameShape {
            channels: doc.input.channels,
            height: doc.input.height,
            width: doc.input.width,
        },
        layers,
    );
    net.continual = doc.continual;
    net.frame_rate = doc.frame_rate;
    net.validate()
        .map_err(|e| anyhow!("invalid network spec: {e}"))?;
    Ok(net)
}

fn convert_layers(docs: &[LayerDoc], channels: &mut usize) -> Result<Vec<Layer>> {
    let mut out = Vec::with_capacity(docs.len());
    for doc in docs {
        let layer = match doc {
            LayerDoc::Conv3d {
                name,
                out_channels,
                groups,
                bias,
                temporal,
                spatial_h,
                spatial_w,
                state_frames_override,
            } => {
                let spec = ConvSpec {
                    in_channels: *channels,
                    out_channels: *out_channels,
                    groups: *groups,
                    temporal: (*temporal).into(),
                    spatial_h: (*spatial_h).into(),
                    spatial_w: (*spatial_w).into(),
                    has_bias: *bias,
                    weights: None,
                    bias: None,
                    state_frames_override: *state_frames_override,
                };
                *channels = *out_channels;
                Layer::new(name.clone(), LayerKind::Conv3d(spec))
            }
            LayerDoc::Pool {
                name,
                pool,
                temporal,
                spatial_h,
                spatial_w,
            } => Layer::new(
                name.clone(),
                LayerKind::Pool(PoolSpec {
                    kind: pool_kind(*pool),
                    temporal: (*temporal).into(),
                    spatial: PoolSpatial::Windowed {
                        h: (*spatial_h).into(),
                        w: (*spatial_w).into(),
                    },
                }),
            ),
            LayerDoc::GlobalPool {
                name,
                pool,
                temporal_kernel,
            } => Layer::new(
                name.clone(),
                LayerKind::GlobalPool {
                    kind: pool_kind(*pool),
                    temporal_kernel: *temporal_kernel,
                },
            ),
            LayerDoc::Activation { name, function } => Layer::new(
                name.clone(),
                LayerKind::Activation(match function {
                    ActivationDoc::Relu => Activation::Relu,
                    ActivationDoc::Sigmoid => Activation::Sigmoid,
                }),
            ),
            LayerDoc::Norm { name, epsilon } => Layer::new(
                name.clone(),
                LayerKind::Norm(NormSpec::identity(*channels, *epsilon)),
            ),
            LayerDoc::Se { name, reduction } => Layer::new(
                name.clone(),
                LayerKind::Se(SeSpec::new(*channels, *reduction)),
            ),
            LayerDoc::Linear {
                name,
                out_features,
                bias,
            } => {
                let spec = LinearSpec {
                    in_features: *channels,
                    out_features: *out_features,
                    has_bias: *bias,
                    weights: None,
                    bias: None,
                };
                *channels = *out_features;
                Layer::new(name.clone(), LayerKind::Linear(spec))
            }
            LayerDoc::ResidualBlock { name, inner, skip } => {
                let mut inner_channels = *channels;
                let inner_layers = convert_layers(inner, &mut inner_channels)?;
                let mut skip_channels = *channels;
                let skip_layers = convert_layers(skip, &mut skip_channels)?;
                if !skip.is_empty() && skip_channels != inner_channels {
                    bail!(
                        "residual block `{name}`: inner path ends at {inner_channels} channels, \
                         skip path at {skip_channels}"
                    );
                }
                *channels = inner_channels;
                Layer::new(
                    name.clone(),
                    LayerKind::Residual(ResidualSpec {
                        inner: inner_layers,
                        skip: skip_layers,
                    }),
                )
            }
        };
        out.push(layer);
    }
    Ok(out)
}

fn pool_kind(doc: PoolKindDoc) -> PoolKind {
    match doc {
        PoolKindDoc::Avg => PoolKind::Avg,
        PoolKindDoc::Max => PoolKind::Max,
    }
}

/// Render a runtime spec back into its document form.
pub fn from_network(net: &NetworkSpec) -> Result<SpecDocument> {
    Ok(SpecDocument {
        version: FORMAT_VERSION,
        continual: net.continual,
        frame_rate: net.frame_rate,
        input: InputDoc {
            channels: net.input.channels,
            height: net.input.height,
            width: net.input.width,
        },
        layers: render_layers(&net.layers)?,
    })
}

fn render_layers(layers: &[Layer]) -> Result<Vec<LayerDoc>> {
    layers
        .iter()
        .map(|layer| {
            Ok(match &layer.kind {
                LayerKind::Conv3d(c) => LayerDoc::Conv3d {
                    name: layer.name.clone(),
                    out_channels: c.out_channels,
                    groups: c.groups,
                    bias: c.has_bias,
                    temporal: c.temporal.into(),
                    spatial_h: c.spatial_h.into(),
                    spatial_w: c.spatial_w.into(),
                    state_frames_override: c.state_frames_override,
                },
                LayerKind::Pool(p) => match &p.spatial {
                    PoolSpatial::Windowed { h, w } => LayerDoc::Pool {
                        name: layer.name.clone(),
                        pool: pool_kind_doc(p.kind),
                        temporal: p.temporal.into(),
                        spatial_h: (*h).into(),
                        spatial_w: (*w).into(),
                    },
                    PoolSpatial::Global => LayerDoc::GlobalPool {
                        name: layer.name.clone(),
                        pool: pool_kind_doc(p.kind),
                        temporal_kernel: p.temporal.kernel,
                    },
                },
                LayerKind::GlobalPool {
                    kind,
                    temporal_kernel,
                } => LayerDoc::GlobalPool {
                    name: layer.name.clone(),
                    pool: pool_kind_doc(*kind),
                    temporal_kernel: *temporal_kernel,
                },
                LayerKind::Activation(a) => LayerDoc::Activation {
                    name: layer.name.clone(),
                    function: match a {
                        Activation::Relu => ActivationDoc::Relu,
                        Activation::Sigmoid => ActivationDoc::Sigmoid,
                    },
                },
                LayerKind::Norm(n) => LayerDoc::Norm {
                    name: layer.name.clone(),
                    epsilon: n.epsilon,
                },
                LayerKind::Se(s) => LayerDoc::Se {
                    name: layer.name.clone(),
                    reduction: s.reduction,
                },
                LayerKind::Linear(l) => LayerDoc::Linear {
                    name: layer.name.clone(),
                    out_features: l.out_features,
                    bias: l.has_bias,
                },
                LayerKind::Residual(res) => LayerDoc::ResidualBlock {
                    name: layer.name.clone(),
                    inner: render_layers(&res.inner)?,
                    skip: render_layers(&res.skip)?,
                },
            })
        })
        .collect()
}

fn pool_kind_doc(kind: PoolKind) -> PoolKindDoc {
    match kind {
        PoolKind::Avg => PoolKindDoc::Avg,
        PoolKind::Max => PoolKindDoc::Max,
    }
}
