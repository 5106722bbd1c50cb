//! Command-line surface for the continual-CNN runtime.
//!
//! Exit codes: 0 on success, 1 when verification finds a deviation beyond
//! tolerance, 2 for usage, parse or IO errors.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use coconv_cli::bench::{run_bench, BenchMode, BenchOptions};
use coconv_cli::doc;
use coconv_cli::report::{render_cost, render_summary, ReportFormat};
use coconv_cli::transient::{transient_trace, TransientOptions};
use coconv_cli::verify::{run_verify, VerifyOptions};
use coconv_cli::weights::load_weights;
use coconv_core::conv::InitScheme;
use coconv_core::cost::{cost_report, CostMode, FlopConvention};
use coconv_core::network::{
    analyze, convert_to_continual_with, seed_weights, LayerKind, NetworkSpec,
};
use coconv_core::x3d::{builtin, X3dOptions};

#[derive(Parser)]
#[command(
    name = "coconv",
    version,
    about = "Streaming (continual) 3D-CNN inference: verification, cost accounting, benchmarks",
    after_help = "SPEC may be a built-in name (x3d-s, x3d-m, x3d-l) or a path to a network \
                  spec JSON document. --spatial/--pool-size/--classes reshape built-ins only."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Clip,
    Continual,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zeros,
    Replicate,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchModeArg {
    Clip,
    Continual,
    Both,
}

#[derive(clap::Args, Clone)]
struct SpecArgs {
    /// Built-in name or path to a spec document.
    #[arg(long)]
    spec: String,
    /// Override a built-in's spatial input resolution.
    #[arg(long)]
    spatial: Option<usize>,
    /// Override a built-in's final global pool temporal kernel.
    #[arg(long)]
    pool_size: Option<usize>,
    /// Override a built-in's class count.
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the receptive field, aggregate temporal padding, transient
    /// length and total delay.
    Analyze {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a clip-wise spec to its continual form and emit the document.
    Convert {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer and total FLOPs, state memory, transient memory and delay.
    /// CSV columns: name,stage,kind,state_floats,state_expression,
    /// transient_frame_floats,transient_clip_floats,delay_frames,macs_clip,
    /// macs_frame,elementwise_clip,elementwise_frame,pool_ops_clip,
    /// pool_ops_frame,temporal_out.
    Cost {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value = "continual")]
        mode: ModeArg,
        /// Clip length; defaults to the spec's final global pool kernel.
        #[arg(long)]
        clip_size: Option<usize>,
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
        /// FLOPs charged per multiply-accumulate.
        #[arg(long, default_value_t = 1)]
        flops_per_mac: u64,
        /// Exclude bias terms from the kernel cost.
        #[arg(long)]
        no_bias_count: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream seeded noise and compare continual outputs against the
    /// clip-wise oracle. Output CSV columns: step,valid,deviation.
    Verify {
        #[command(flatten)]
        spec: SpecArgs,
        /// Stream length; defaults to r_T + 16.
        #[arg(long, default_value_t = 0)]
        frames: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f32,
        /// Weight file; omitted weights are seeded from --seed.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace start-up validity step by step. Output CSV columns:
    /// step,valid,deviation (deviation vs. the sliding-window oracle).
    Transient {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value = "zeros")]
        init: InitArg,
        /// Stream length; defaults to transient + 8.
        #[arg(long, default_value_t = 0)]
        frames: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure predictions per second on synthetic streams.
    Bench {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value = "both")]
        mode: BenchModeArg,
        /// Concurrent streams, one thread each.
        #[arg(long, default_value_t = 1)]
        streams: usize,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Untimed steps before measurement.
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        /// Timed predictions per stream per repetition.
        #[arg(long, default_value_t = 16)]
        frames: usize,
        /// Window length for clip mode; defaults to the final pool kernel.
        #[arg(long)]
        clip_size: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_spec(args: &SpecArgs) -> Result<NetworkSpec> {
    let opts = X3dOptions {
        spatial: args.spatial,
        pool_size: args.pool_size,
        classes: args.classes,
    };
    if let Some(net) = builtin(&args.spec, opts) {
        return Ok(net);
    }
    if args.spatial.is_some() || args.pool_size.is_some() || args.classes.is_some() {
        bail!("--spatial/--pool-size/--classes apply to built-in specs only");
    }
    let text = std::fs::read_to_string(&args.spec)
        .with_context(|| format!("reading spec {}", args.spec))?;
    doc::to_network(&doc::parse(&text)?)
}

fn load_spec_with_weights(
    args: &SpecArgs,
    weights: &Option<PathBuf>,
    seed: u64,
) -> Result<NetworkSpec> {
    let mut net = load_spec(args)?;
    match weights {
        Some(path) => {
            for warning in load_weights(path, &mut net, seed)? {
                eprintln!("warning: {warning}");
            }
        }
        None => seed_weights(&mut net, seed),
    }
    Ok(net)
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn default_clip_size(net: &NetworkSpec) -> Option<usize> {
    let mut found = None;
    net.for_each_layer(&mut |layer| {
        if let LayerKind::GlobalPool {
            temporal_kernel, ..
        } = layer.kind
        {
            found = Some(temporal_kernel);
        }
    });
    found
}

fn steps_csv(rows: &[coconv_cli::verify::StepReport]) -> String {
    let mut out = String::from("step,valid,deviation\n");
    for r in rows {
        let dev = r.deviation.map(|d| format!("{d:e}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", r.step, r.valid, dev);
    }
    out
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze { spec, json, out } => {
            let net = load_spec(&spec)?;
            let summary = analyze(&net).map_err(|e| anyhow!("{e}"))?;
            emit(&out, &render_summary(&summary, json)?)?;
            Ok(0)
        }
        Command::Convert { spec, out } => {
            let net = load_spec(&spec)?;
            let padded = net.declared_temporal_padding();
            if !padded.is_empty() {
                eprintln!(
                    "warning: {} layer(s) declare temporal padding; omitting it in the \
                     continual form shifts the model relative to its clip-wise training:",
                    padded.len()
                );
                for (name, p) in padded {
                    eprintln!("  {name} (p_T = {p})");
                }
            }
            let converted = convert_to_continual_with(&net, None).map_err(|e| anyhow!("{e}"))?;
            let document = doc::from_network(&converted)?;
            emit(&out, &(doc::serialize(&document)? + "\n"))?;
            Ok(0)
        }
        Command::Cost {
            spec,
            mode,
            clip_size,
            format,
            flops_per_mac,
            no_bias_count,
            out,
        } => {
            let net = load_spec(&spec)?;
            let clip_size = clip_size
                .or_else(|| default_clip_size(&net))
                .ok_or_else(|| anyhow!("spec has no global pool; pass --clip-size"))?;
            let convention = FlopConvention {
                flops_per_mac,
                count_bias: !no_bias_count,
            };
            let mode = match mode {
                ModeArg::Clip => CostMode::Clip,
                ModeArg::Continual => CostMode::Continual,
            };
            let report =
                cost_report(&net, mode, clip_size, convention).map_err(|e| anyhow!("{e}"))?;
            let format = match format {
                FormatArg::Table => ReportFormat::Table,
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            emit(&out, &render_cost(&report, format)?)?;
            Ok(0)
        }
        Command::Verify {
            spec,
            frames,
            seed,
            tolerance,
            weights,
            out,
        } => {
            let net = load_spec_with_weights(&spec, &weights, seed)?;
            let outcome = run_verify(
                &net,
                &VerifyOptions {
                    frames,
                    seed,
                    tolerance,
                    inject_delay_fault: None,
                },
            )?;
            emit(&out, &steps_csv(&outcome.steps))?;
            eprintln!(
                "max deviation: {:e} (tolerance {:e})",
                outcome.max_deviation, outcome.tolerance
            );
            eprintln!(
                "first valid step: {} (expected {})",
                outcome
                    .first_valid_step
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "never".into()),
                outcome.expected_first_valid
            );
            if let Some(div) = &outcome.divergence {
                eprintln!(
                    "first divergence: layer `{}` at step {} (deviation {:e})",
                    div.layer, div.step, div.deviation
                );
            }
            if outcome.passed {
                eprintln!("PASS");
                Ok(0)
            } else {
                eprintln!("FAIL");
                Ok(1)
            }
        }
        Command::Transient {
            spec,
            init,
            frames,
            seed,
            weights,
            out,
        } => {
            let net = load_spec_with_weights(&spec, &weights, seed)?;
            let trace = transient_trace(
                &net,
                &TransientOptions {
                    init: match init {
                        InitArg::Zeros => InitScheme::Zeros,
                        InitArg::Replicate => InitScheme::Replicate,
                    },
                    frames,
                    seed,
                },
            )?;
            emit(&out, &steps_csv(&trace.rows))?;
            eprintln!(
                "transient length: {} (r_T = {})",
                trace.transient_len, trace.receptive_field
            );
            eprintln!(
                "first valid step: {} (expected {})",
                trace
                    .first_valid_step
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "never".into()),
                trace.expected_first_valid
            );
            Ok(
                if trace.first_valid_step == Some(trace.expected_first_valid) {
                    0
                } else {
                    1
                },
            )
        }
        Command::Bench {
            spec,
            mode,
            streams,
            repetitions,
            warmup,
            frames,
            clip_size,
            seed,
            weights,
            out,
        } => {
            let net = load_spec_with_weights(&spec, &weights, seed)?;
            let opts = BenchOptions {
                streams,
                repetitions,
                warmup,
                frames,
                seed,
                clip_size: clip_size.unwrap_or(0),
            };
            let mut text = String::new();
            let mut results = Vec::new();
            let modes: &[BenchMode] = match mode {
                BenchModeArg::Clip => &[BenchMode::Clip],
                BenchModeArg::Continual => &[BenchMode::Continual],
                BenchModeArg::Both => &[BenchMode::Continual, BenchMode::Clip],
            };
            for m in modes {
                let r = run_bench(&net, *m, &opts)?;
                let label = match r.mode {
                    BenchMode::Clip => "clip",
                    BenchMode::Continual => "continual",
                };
                let _ = writeln!(
                    text,
                    "{label:<10} {:>12.2} predictions/s (std {:.2}, {} streams x {} frames x {} reps, {} warmup)",
                    r.mean_predictions_per_sec,
                    r.std_predictions_per_sec,
                    r.streams,
                    frames,
                    r.repetitions,
                    r.warmup
                );
                results.push(r);
            }
            if results.len() == 2 {
                let ratio =
                    results[0].mean_predictions_per_sec / results[1].mean_predictions_per_sec;
                let _ = writeln!(text, "continual/clip speedup: {ratio:.2}x");
            }
            emit(&out, &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
