//! Synthetic-stream throughput benchmarks.
//!
//! Continual mode steps per-stream state once per frame. Clip mode does
//! what an online deployment of a clip-wise network must do: keep the last
//! `m_T` frames, reassemble the window into a fresh clip on every step
//! (the copy is part of the measured cost) and run the whole network over
//! it. Streams run on their own threads with their own state; warm-up
//! iterations never enter the statistics.

use std::collections::VecDeque;
use std::time::Instant;

use anyhow::{bail, Result};

use coconv_core::conv::InitScheme;
use coconv_core::network::{analyze, convert_to_continual, forward_clip_dense, NetworkSpec};
use coconv_core::rng::SplitMix64;
use coconv_core::stream::CoNetwork;
use coconv_core::synth::random_frame;
use coconv_core::tensor::ClipTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Clip,
    Continual,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub streams: usize,
    pub repetitions: usize,
    pub warmup: usize,
    /// Timed predictions per stream per repetition.
    pub frames: usize,
    pub seed: u64,
    /// Window length for clip mode; 0 uses the spec's final pool size.
    pub clip_size: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            streams: 1,
            repetitions: 5,
            warmup: 2,
            frames: 16,
            seed: 7,
            clip_size: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub mode: BenchMode,
    pub streams: usize,
    pub repetitions: usize,
    pub warmup: usize,
    pub predictions_per_rep: usize,
    pub mean_predictions_per_sec: f64,
    pub std_predictions_per_sec: f64,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Shortest clip the network accepts: the receptive field less the
/// padding applied at both ends.
fn default_window(spec: &NetworkSpec) -> Result<usize> {
    let summary = analyze(spec)?;
    Ok(summary
        .receptive_field
        .saturating_sub(2 * summary.aggregate_padding)
        .max(1))
}

/// Benchmark one mode; `spec` is the clip-wise description with weights.
pub fn run_bench(spec: &NetworkSpec, mode: BenchMode, opts: &BenchOptions) -> Result<BenchResult> {
    if opts.repetitions == 0 || opts.streams == 0 || opts.frames == 0 {
        bail!("streams, repetitions and frames must all be >= 1");
    }
    let per_rep = opts.streams * opts.frames;
    let mut rates = vec![0.0f64; opts.repetitions];

    match mode {
        BenchMode::Continual => {
            let co_spec = if spec.continual {
                spec.clone()
            } else {
                convert_to_continual(spec)?
            };
            analyze(&co_spec)?;
            std::thread::scope(|scope| -> Result<()> {
                let mut handles = Vec::new();
                for s in 0..opts.streams {
                    let co_spec = &co_spec;
                    handles.push(scope.spawn(move || -> Result<Vec<f64>> {
                        let input = co_spec.input;
                        let mut rng = SplitMix64::new(opts.seed ^ (s as u64) << 32);
                        let mut net = CoNetwork::compile(co_spec, InitScheme::Zeros, None)?;
                        for _ in 0..opts.warmup {
                            let f =
                                random_frame(&mut rng, input.channels, input.height, input.width);
                            net.step(&f)?;
                        }
                        let mut times = Vec::with_capacity(opts.repetitions);
                        for _ in 0..opts.repetitions {
                            let start = Instant::now();
                            for _ in 0..opts.frames {
                                let f = random_frame(
                                    &mut rng,
                                    input.channels,
                                    input.height,
                                    input.width,
                                );
                                net.step(&f)?;
                            }
                            times.push(start.elapsed().as_secs_f64());
                        }
                        Ok(times)
                    }));
                }
                let mut per_stream = Vec::new();
                for h in handles {
                    per_stream.push(h.join().expect("bench thread panicked")?);
                }
                for rep in 0..opts.repetitions {
                    let slowest = per_stream.iter().map(|t| t[rep]).fold(0.0f64, f64::max);
                    rates[rep] = per_rep as f64 / slowest;
                }
                Ok(())
            })?;
        }
        BenchMode::Clip => {
            let window = if opts.clip_size > 0 {
                opts.clip_size
            } else {
                default_window(spec)?
            };
            std::thread::scope(|scope| -> Result<()> {
                let mut handles = Vec::new();
                for s in 0..opts.streams {
                    let spec_ref = &*spec;
                    handles.push(scope.spawn(move || -> Result<Vec<f64>> {
                        let input = spec_ref.input;
                        let mut rng = SplitMix64::new(opts.seed ^ (s as u64) << 32);
                        let mut history = VecDeque::with_capacity(window);
                        // Prime the window so every timed step runs the network.
                        while history.len() < window {
                            history.push_back(random_frame(
                                &mut rng,
                                input.channels,
                                input.height,
                                input.width,
                            ));
                        }
                        let mut run_step = |history: &mut VecDeque<_>| -> Result<()> {
                            history.pop_front();
                            history.push_back(random_frame(
                                &mut rng,
                                input.channels,
                                input.height,
                                input.width,
                            ));
                            let frames: Vec<_> = history.iter().cloned().collect();
                            let clip = ClipTensor::from_frames(&frames)?;
                            forward_clip_dense(spec_ref, &clip)?;
                            Ok(())
                        };
                        for _ in 0..opts.warmup {
                            run_step(&mut history)?;
                        }
                        let mut times = Vec::with_capacity(opts.repetitions);
                        for _ in 0..opts.repetitions {
                            let start = Instant::now();
                            for _ in 0..opts.frames {
                                run_step(&mut history)?;
                            }
                            times.push(start.elapsed().as_secs_f64());
                        }
                        Ok(times)
                    }));
                }
                let mut per_stream = Vec::new();
                for h in handles {
                    per_stream.push(h.join().expect("bench thread panicked")?);
                }
                for rep in 0..opts.repetitions {
                    let slowest = per_stream.iter().map(|t| t[rep]).fold(0.0f64, f64::max);
                    rates[rep] = per_rep as f64 / slowest;
                }
                Ok(())
            })?;
        }
    }

    let (mean, std) = mean_std(&rates);
    Ok(BenchResult {
        mode,
        streams: opts.streams,
        repetitions: opts.repetitions,
        warmup: opts.warmup,
        predictions_per_rep: per_rep,
        mean_predictions_per_sec: mean,
        std_predictions_per_sec: std,
    })
}
