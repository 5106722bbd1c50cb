//! Per-step transient traces: which steps are flagged valid, and how far
//! each emission sits from the sliding-window oracle.

use anyhow::{bail, Result};

use coconv_core::conv::InitScheme;
use coconv_core::network::{analyze, convert_to_continual, forward_clip_dense, NetworkSpec};
use coconv_core::rng::SplitMix64;
use coconv_core::stream::CoNetwork;
use coconv_core::synth::random_stream;
use coconv_core::tensor::ClipTensor;

use crate::verify::StepReport;

#[derive(Debug, Clone, Copy)]
pub struct TransientOptions {
    pub init: InitScheme,
    pub frames: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TransientTrace {
    pub rows: Vec<StepReport>,
    pub first_valid_step: Option<usize>,
    pub expected_first_valid: usize,
    pub transient_len: usize,
    pub receptive_field: usize,
}

/// Stream seeded noise and record validity plus oracle deviation per step.
///
/// With zero initialization, the oracle pads the stream with leading zero
/// frames; with replicate initialization the first stream frame stands in
/// for all history, and outputs are valid from the first step.
pub fn transient_trace(clip_spec: &NetworkSpec, opts: &TransientOptions) -> Result<TransientTrace> {
    let co_spec = if clip_spec.continual {
        clip_spec.clone()
    } else {
        convert_to_continual(clip_spec)?
    };
    crate::verify::reject_temporal_stride(&co_spec)?;
    let summary = analyze(&co_spec)?;
    let frames = if opts.frames == 0 {
        summary.transient_len + 8
    } else {
        opts.frames
    };
    if frames <= summary.transient_len && opts.init == InitScheme::Zeros {
        bail!(
            "need more than transient_len = {} frames, got {frames}",
            summary.transient_len
        );
    }

    let input = co_spec.input;
    let mut rng = SplitMix64::new(opts.seed);
    let stream = random_stream(&mut rng, frames, input.channels, input.height, input.width);

    let pad = summary.receptive_field - 1;
    let mut padded = Vec::with_capacity(pad + frames);
    match opts.init {
        InitScheme::Zeros => {
            padded = crate::verify::padded_stream(
                (input.channels, input.height, input.width),
                pad,
                &stream,
            );
        }
        InitScheme::Replicate => {
            for _ in 0..pad {
                padded.push(stream[0].clone());
            }
            padded.extend(stream.iter().cloned());
        }
    }
    let oracle = forward_clip_dense(&co_spec, &ClipTensor::from_frames(&padded)?)?;

    let mut co = match opts.init {
        InitScheme::Zeros => CoNetwork::compile(&co_spec, InitScheme::Zeros, None)?,
        InitScheme::Replicate => {
            CoNetwork::compile(&co_spec, InitScheme::Replicate, Some(&stream[0]))?
        }
    };

    let mut rows = Vec::with_capacity(frames);
    let mut first_valid = None;
    for (t, frame) in stream.iter().enumerate() {
        let out = co.step(frame)?;
        let mut deviation = None;
        if let Some(f) = &out.frame {
            let want = oracle.frame(t)?;
            let d = f
                .data()
                .iter()
                .zip(want.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            deviation = Some(d);
        }
        if out.valid {
            first_valid.get_or_insert(t + 1);
        }
        rows.push(StepReport {
            step: t + 1,
            valid: out.valid,
            deviation,
        });
    }

    let expected_first_valid = match opts.init {
        InitScheme::Zeros => summary.transient_len + 1,
        InitScheme::Replicate => 1,
    };
    Ok(TransientTrace {
        rows,
        first_valid_step: first_valid,
        expected_first_valid,
        transient_len: summary.transient_len,
        receptive_field: summary.receptive_field,
    })
}
