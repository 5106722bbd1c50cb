//! Equivalence verification: stream a seeded noise sequence through the
//! continual network and compare every valid emission against the
//! clip-wise computation over the corresponding window.
//!
//! The oracle is the converted (temporally unpadded) network evaluated
//! densely over the stream left-padded with `r_T - 1` zero frames, so
//! oracle position `t` is exactly the window ending at stream frame `t`.
//! This matches the zero-initialized streaming state; networks whose
//! layers map zero frames to zero frames (no convolution bias, zero
//! running mean and shift) agree during the early padded windows as well
//! as in steady state.

use anyhow::{bail, Result};

use coconv_core::conv::InitScheme;
use coconv_core::network::{
    analyze, convert_to_continual, forward_clip_dense, forward_clip_dense_traced, NetworkSpec,
};
use coconv_core::rng::SplitMix64;
use coconv_core::stream::CoNetwork;
use coconv_core::synth::random_stream;
use coconv_core::tensor::{ClipTensor, FrameTensor};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub frames: usize,
    pub seed: u64,
    pub tolerance: f32,
    /// Fault injection for exercising the failure path: stretches or
    /// shrinks the named residual block's delay line before streaming.
    pub inject_delay_fault: Option<(String, isize)>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            frames: 0,
            seed: 42,
            tolerance: 1e-4,
            inject_delay_fault: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepReport {
    /// 1-based step index.
    pub step: usize,
    pub valid: bool,
    /// Max absolute deviation from the oracle, for valid steps.
    pub deviation: Option<f32>,
}

#[derive(Debug, Clone)]
pub struct Divergence {
    pub layer: String,
    pub step: usize,
    pub deviation: f32,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub steps: Vec<StepReport>,
    pub max_deviation: f32,
    pub first_valid_step: Option<usize>,
    pub expected_first_valid: usize,
    pub tolerance: f32,
    pub passed: bool,
    pub divergence: Option<Divergence>,
}

/// Zero frames, then the stream: the dense-oracle input.
pub fn padded_stream(
    net_input: (usize, usize, usize),
    pad: usize,
    stream: &[FrameTensor],
) -> Vec<FrameTensor> {
    let (c, h, w) = net_input;
    let mut frames: Vec<FrameTensor> = (0..pad).map(|_| FrameTensor::zeros(c, h, w)).collect();
    frames.extend(stream.iter().cloned());
    frames
}

/// The step-to-oracle-position mapping below assumes one emission per input
/// frame. Strided layers are exercised by the layer-level oracle tests.
pub(crate) fn reject_temporal_stride(net: &NetworkSpec) -> Result<()> {
    let mut strided = None;
    net.for_each_layer(&mut |layer| {
        use coconv_core::network::LayerKind;
        let s = match &layer.kind {
            LayerKind::Conv3d(c) => c.temporal.stride,
            LayerKind::Pool(p) => p.temporal.stride,
            _ => 1,
        };
        if s > 1 && strided.is_none() {
            strided = Some(layer.name.clone());
        }
    });
    if let Some(name) = strided {
        bail!(
            "layer `{name}` has a temporal stride; stream verification is defined for \
             stride-1 networks"
        );
    }
    Ok(())
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f32, f32::max)
}

/// Run the verification protocol on a clip-wise spec with weights installed.
pub fn run_verify(clip_spec: &NetworkSpec, opts: &VerifyOptions) -> Result<VerifyOutcome> {
    let co_spec = if clip_spec.continual {
        clip_spec.clone()
    } else {
        convert_to_continual(clip_spec)?
    };
    reject_temporal_stride(&co_spec)?;
    let summary = analyze(&co_spec)?;
    let frames = if opts.frames == 0 {
        summary.receptive_field + 16
    } else {
        opts.frames
    };
    if frames < summary.receptive_field {
        bail!(
            "need at least r_T = {} frames, got {frames}",
            summary.receptive_field
        );
    }

    let mut rng = SplitMix64::new(opts.seed);
    let input = co_spec.input;
    let stream = random_stream(&mut rng, frames, input.channels, input.height, input.width);

    let padded = padded_stream(
        (input.channels, input.height, input.width),
        summary.receptive_field - 1,
        &stream,
    );
    let oracle = forward_clip_dense(&co_spec, &ClipTensor::from_frames(&padded)?)?;
    debug_assert_eq!(oracle.time(), frames);

    let mut co = CoNetwork::compile(&co_spec, InitScheme::Zeros, None)?;
    if let Some((block, delta)) = &opts.inject_delay_fault {
        if !co.tamper_residual_delay(block, *delta) {
            bail!("no residual block named `{block}` to inject a delay fault into");
        }
    }
    let mut steps = Vec::with_capacity(frames);
    let mut max_deviation = 0.0f32;
    let mut first_valid = None;
    for (t, frame) in stream.iter().enumerate() {
        let out = co.step(frame)?;
        let mut deviation = None;
        if out.valid {
            first_valid.get_or_insert(t + 1);
            if let Some(f) = &out.frame {
                let want = oracle.frame(t)?;
                let d = max_abs_diff(f.data(), want.data());
                max_deviation = max_deviation.max(d);
                deviation = Some(d);
            }
        }
        steps.push(StepReport {
            step: t + 1,
            valid: out.valid,
            deviation,
        });
    }

    let expected_first_valid = summary.transient_len + 1;
    let passed = max_deviation <= opts.tolerance && first_valid == Some(expected_first_valid);
    let divergence = if passed {
        None
    } else {
        diagnose(&co_spec, &stream, summary.receptive_field, opts)
            .ok()
            .flatten()
    };

    Ok(VerifyOutcome {
        steps,
        max_deviation,
        first_valid_step: first_valid,
        expected_first_valid,
        tolerance: opts.tolerance,
        passed,
        divergence,
    })
}

/// Find the first top-level layer whose streamed output leaves the dense
/// oracle, and the first step where it does.
fn diagnose(
    co_spec: &NetworkSpec,
    stream: &[FrameTensor],
    receptive: usize,
    opts: &VerifyOptions,
) -> Result<Option<Divergence>> {
    let tolerance = opts.tolerance;
    let input = co_spec.input;
    let padded = padded_stream(
        (input.channels, input.height, input.width),
        receptive - 1,
        stream,
    );
    let traced = forward_clip_dense_traced(co_spec, &ClipTensor::from_frames(&padded)?)?;

    // Receptive field of each prefix maps continual steps onto dense
    // positions: step t of layer j sits at position t + r_T - r_j.
    let mut prefix_r = Vec::with_capacity(co_spec.layers.len());
    for k in 1..=co_spec.layers.len() {
        let prefix = NetworkSpec {
            input: co_spec.input,
            frame_rate: None,
            continual: true,
            layers: co_spec.layers[..k].to_vec(),
        };
        prefix_r.push(analyze(&prefix)?.receptive_field);
    }

    let mut co = CoNetwork::compile(co_spec, InitScheme::Zeros, None)?;
    if let Some((block, delta)) = &opts.inject_delay_fault {
        co.tamper_residual_delay(block, *delta);
    }
    let mut worst: Option<Divergence> = None;
    for (t, frame) in stream.iter().enumerate() {
        let (_, traces) = co.step_traced(frame)?;
        for (j, trace) in traces.iter().enumerate() {
            if !trace.valid {
                continue;
            }
            let Some(out) = &trace.output else { continue };
            let (name, dense) = &traced[j];
            let pos = t + receptive - prefix_r[j];
            if pos >= dense.time() {
                continue;
            }
            let d = max_abs_diff(out.data(), dense.frame(pos)?.data());
            if d > tolerance {
                let candidate = Divergence {
                    layer: name.clone(),
                    step: t + 1,
                    deviation: d,
                };
                let replace = match &worst {
                    None => true,
                    Some(w) => {
                        let w_idx = co_spec.layers.iter().position(|l| l.name == w.layer);
                        let c_idx = Some(j);
                        c_idx < w_idx || (c_idx == w_idx && candidate.step < w.step)
                    }
                };
                if replace {
                    worst = Some(candidate);
                }
            }
        }
    }
    Ok(worst)
}
