//! The compiled frame-by-frame runtime.
//!
//! A [`CoNetwork`] owns one stream's worth of state: a ring buffer per
//! temporal convolution, a map ring per temporal pool, and a delay line per
//! residual skip. Step calls are strictly sequential; run one `CoNetwork`
//! per stream and as many networks in parallel as you like.
//!
//! Every layer computes on every step from the first frame on (states start
//! at zero), so early outputs equal the clip-wise network applied to the
//! stream left-padded with zeros. The `valid` flag turns true once the
//! output's receptive window is covered by real frames up to the declared
//! temporal padding, i.e. after `r_T - p_T - 1` frames.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::conv::{CoConvState, ConvSpec, InitScheme, StepOutput};
use crate::error::{Error, Result};
use crate::layers::{norm_infer, se_step, Activation, DelayLine, NormSpec, SeSpec};
use crate::network::{
    analyze, infer_shapes, inner_path_stats, layer_out_shape, FrameShape, Layer, LayerKind,
    LinearSpec, NetworkSpec, ReceptiveSummary,
};
use crate::pool::{copool_step_with, CoPoolState, PoolSpatial, PoolSpec};
use crate::tensor::{DimSpec, FrameTensor};

enum CoLayer {
    Conv {
        name: String,
        spec: ConvSpec,
        state: CoConvState,
    },
    Pool {
        name: String,
        spec: PoolSpec,
        state: CoPoolState,
    },
    Norm {
        name: String,
        spec: NormSpec,
    },
    Act {
        name: String,
        func: Activation,
    },
    Se {
        name: String,
        spec: SeSpec,
    },
    Linear {
        name: String,
        spec: LinearSpec,
    },
    Residual {
        name: String,
        line: DelayLine,
        skip: Vec<CoLayer>,
        inner: Vec<CoLayer>,
    },
}

impl CoLayer {
    fn name(&self) -> &str {
        match self {
            CoLayer::Conv { name, .. }
            | CoLayer::Pool { name, .. }
            | CoLayer::Norm { name, .. }
            | CoLayer::Act { name, .. }
            | CoLayer::Se { name, .. }
            | CoLayer::Linear { name, .. }
            | CoLayer::Residual { name, .. } => name,
        }
    }

    fn state_floats(&self) -> u64 {
        match self {
            CoLayer::Conv { state, .. } => state.state_floats() as u64,
            CoLayer::Pool { state, .. } => state.state_floats() as u64,
            CoLayer::Residual {
                line, skip, inner, ..
            } => {
                line.state_floats() as u64
                    + skip.iter().map(CoLayer::state_floats).sum::<u64>()
                    + inner.iter().map(CoLayer::state_floats).sum::<u64>()
            }
            _ => 0,
        }
    }
}

/// Output of one layer during a traced step, for divergence diagnostics.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub name: String,
    pub output: Option<FrameTensor>,
    pub valid: bool,
}

/// A compiled continual network bound to one stream.
pub struct CoNetwork {
    input: FrameShape,
    layers: Vec<CoLayer>,
    steps: u64,
    summary: ReceptiveSummary,
}

fn compile_layers(layers: &[Layer], mut shape: FrameShape) -> Result<Vec<CoLayer>> {
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        let compiled = match &layer.kind {
            LayerKind::Conv3d(spec) => CoLayer::Conv {
                name: layer.name.clone(),
                state: spec.init_state(InitScheme::Zeros, None, (shape.height, shape.width))?,
                spec: spec.clone(),
            },
            LayerKind::Pool(spec) => CoLayer::Pool {
                name: layer.name.clone(),
                state: CoPoolState::new(spec, shape.channels, shape.height, shape.width)?,
                spec: spec.clone(),
            },
            LayerKind::GlobalPool {
                kind,
                temporal_kernel,
            } => {
                let spec = PoolSpec {
                    kind: *kind,
                    temporal: DimSpec::plain(*temporal_kernel),
                    spatial: PoolSpatial::Global,
                };
                CoLayer::Pool {
                    name: layer.name.clone(),
                    state: CoPoolState::new(&spec, shape.channels, shape.height, shape.width)?,
                    spec,
                }
            }
            LayerKind::Activation(func) => CoLayer::Act {
                name: layer.name.clone(),
                func: *func,
            },
            LayerKind::Norm(spec) => CoLayer::Norm {
                name: layer.name.clone(),
                spec: spec.clone(),
            },
            LayerKind::Se(spec) => CoLayer::Se {
                name: layer.name.clone(),
                spec: spec.clone(),
            },
            LayerKind::Linear(spec) => CoLayer::Linear {
                name: layer.name.clone(),
                spec: spec.clone(),
            },
            LayerKind::Residual(res) => {
                let (_, delay) = inner_path_stats(res)?;
                CoLayer::Residual {
                    name: layer.name.clone(),
                    line: DelayLine::new(delay, shape.channels, shape.height, shape.width),
                    skip: compile_layers(&res.skip, shape)?,
                    inner: compile_layers(&res.inner, shape)?,
                }
            }
        };
        out.push(compiled);
        shape = layer_out_shape(layer, shape)?;
    }
    Ok(out)
}

fn step_layers(
    layers: &mut [CoLayer],
    frame: FrameTensor,
    valid: bool,
    trace: Option<&mut Vec<LayerTrace>>,
) -> Result<Option<(FrameTensor, bool)>> {
    let mut cur = frame;
    let mut cur_valid = valid;
    let mut trace = trace;
    for layer in layers.iter_mut() {
        let out: StepOutput = match layer {
            CoLayer::Conv { spec, state, .. } => spec.step_with(&cur, cur_valid, state)?,
            CoLayer::Pool { spec, state, .. } => copool_step_with(&cur, cur_valid, state, spec)?,
            CoLayer::Norm { spec, .. } => StepOutput {
                frame: Some(norm_infer(&cur, spec)?),
                valid: cur_valid,
            },
            CoLayer::Act { func, .. } => StepOutput {
                frame: Some(func.apply_frame(&cur)),
                valid: cur_valid,
            },
            CoLayer::Se { spec, .. } => StepOutput {
                frame: Some(se_step(&cur, spec)?),
                valid: cur_valid,
            },
            CoLayer::Linear { spec, name } => {
                if cur.height() != 1 || cur.width() != 1 {
                    return Err(Error::Shape(format!(
                        "layer `{name}` requires pooled 1x1 input"
                    )));
                }
                let y = spec.apply_vec(cur.data())?;
                StepOutput {
                    frame: Some(FrameTensor::new(spec.out_features, 1, 1, y)?),
                    valid: cur_valid,
                }
            }
            CoLayer::Residual {
                line,
                skip,
                inner,
                name,
            } => {
                let (delayed, delayed_valid) = line.step(cur.clone(), cur_valid)?;
                let skip_out =
                    step_layers(skip, delayed, delayed_valid, None)?.ok_or_else(|| {
                        Error::Shape(format!("residual `{name}`: skip path suppressed a frame"))
                    })?;
                let inner_out = step_layers(inner, cur, cur_valid, None)?.ok_or_else(|| {
                    Error::Shape(format!("residual `{name}`: inner path suppressed a frame"))
                })?;
                let (mut sum, inner_valid) = inner_out;
                if sum.shape() != skip_out.0.shape() {
                    return Err(Error::Shape(format!(
                        "residual `{name}`: inner shape {:?} != skip shape {:?}",
                        sum.shape(),
                        skip_out.0.shape()
                    )));
                }
                for (o, v) in sum.data_mut().iter_mut().zip(skip_out.0.data()) {
                    *o += *v;
                }
                StepOutput {
                    frame: Some(sum),
                    valid: inner_valid && skip_out.1,
                }
            }
        };
        if let Some(t) = trace.as_deref_mut() {
            t.push(LayerTrace {
                name: layer.name().into(),
                output: out.frame.clone(),
                valid: out.valid,
            });
        }
        match out.frame {
            Some(f) => {
                cur = f;
                cur_valid = out.valid;
            }
            None => return Ok(None),
        }
    }
    Ok(Some((cur, cur_valid)))
}

impl CoNetwork {
    /// Compile a converted spec and initialize per-layer state.
    ///
    /// `Zeros` leaves every buffer zero-filled. `Replicate` streams the
    /// first frame `r_T - 1` times with outputs discarded, which puts every
    /// buffer in the steady state of a stream that has shown that frame
    /// forever; the first real step then already carries a valid output.
    pub fn compile(
        net: &NetworkSpec,
        scheme: InitScheme,
        first_frame: Option<&FrameTensor>,
    ) -> Result<Self> {
        if !net.continual {
            return Err(Error::Unconvertible(
                "stream execution requires a continual spec; run the conversion first".into(),
            ));
        }
        net.validate()?;
        infer_shapes(&net.layers, net.input)?;
        let summary = analyze(net)?;
        let mut network = Self {
            input: net.input,
            layers: compile_layers(&net.layers, net.input)?,
            steps: 0,
            summary,
        };
        if scheme == InitScheme::Replicate {
            let seed = first_frame.ok_or(Error::MissingSeedFrame)?;
            for _ in 0..summary.receptive_field.saturating_sub(1) {
                network.step(seed)?;
            }
        }
        Ok(network)
    }

    pub fn input_shape(&self) -> FrameShape {
        self.input
    }

    pub fn summary(&self) -> ReceptiveSummary {
        self.summary
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Floats currently held across all layer states.
    pub fn state_floats(&self) -> u64 {
        self.layers.iter().map(CoLayer::state_floats).sum()
    }

    /// Feed one frame; returns the network's emission for this step.
    pub fn step(&mut self, frame: &FrameTensor) -> Result<StepOutput> {
        self.step_inner(frame, None)
    }

    /// Like [`CoNetwork::step`] but records every top-level layer's output.
    pub fn step_traced(&mut self, frame: &FrameTensor) -> Result<(StepOutput, Vec<LayerTrace>)> {
        let mut trace = Vec::with_capacity(self.layers.len());
        let out = self.step_inner(frame, Some(&mut trace))?;
        Ok((out, trace))
    }

    fn step_inner(
        &mut self,
        frame: &FrameTensor,
        trace: Option<&mut Vec<LayerTrace>>,
    ) -> Result<StepOutput> {
        if frame.shape() != (self.input.channels, self.input.height, self.input.width) {
            return Err(Error::Shape(format!(
                "input frame shape {:?} does not match network input {:?}",
                frame.shape(),
                self.input
            )));
        }
        self.steps += 1;
        match step_layers(&mut self.layers, frame.clone(), true, trace)? {
            Some((f, valid)) => Ok(StepOutput {
                frame: Some(f),
                valid,
            }),
            None => Ok(StepOutput::suppressed()),
        }
    }

    /// Fault-injection hook for verification tests: stretch or shrink the
    /// delay line of the named residual block.
    #[doc(hidden)]
    pub fn tamper_residual_delay(&mut self, name: &str, delta: isize) -> bool {
        fn walk(layers: &mut [CoLayer], name: &str, delta: isize) -> bool {
            for layer in layers {
                if let CoLayer::Residual {
                    name: n,
                    line,
                    inner,
                    skip,
                } = layer
                {
                    if n == name {
                        line.tamper(delta);
                        return true;
                    }
                    if walk(inner, name, delta) || walk(skip, name, delta) {
                        return true;
                    }
                }
            }
            false
        }
        walk(&mut self.layers, name, delta)
    }
}
