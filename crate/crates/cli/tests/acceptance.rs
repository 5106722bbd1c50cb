//! Acceptance suite: one test per pinned requirement, each printing a
//! single PASS/FAIL line (run with `--nocapture` to see them), covering
//! single-layer and end-to-end oracle equivalence, the exact state-memory
//! ledger of the continual X3D-M, clip-size arithmetic, receptive fields,
//! FLOP totals and ratios, the transient boundary, a measured-state audit
//! and the throughput direction.

use std::time::Instant;

use coconv_cli::bench::{run_bench, BenchMode, BenchOptions};
use coconv_cli::transient::{transient_trace, TransientOptions};
use coconv_cli::verify::{run_verify, VerifyOptions};
use coconv_core::conv::{conv3d, ConvSpec, InitScheme};
use coconv_core::cost::{memory_report, CostMode, CostReport, RowKind};
use coconv_core::layers::{Activation, NormSpec, SeSpec};
use coconv_core::network::{
    analyze, convert_to_continual, seed_weights, FrameShape, Layer, LayerKind, LinearSpec,
    NetworkSpec, ResidualSpec,
};
use coconv_core::pool::PoolKind;
use coconv_core::rng::SplitMix64;
use coconv_core::stream::CoNetwork;
use coconv_core::synth::random_stream;
use coconv_core::tensor::{ClipTensor, DimSpec};
use coconv_core::x3d::{builtin_x3d_m, x3d, X3dOptions, X3dVariant};

fn report(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

#[test]
fn acceptance_01_single_layer_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACC1);
    let mut worst = 0.0f32;
    for case in 0..200 {
        let k_t = [1usize, 2, 3, 5][(rng.next_u64() % 4) as usize];
        let d_t = 1 + (rng.next_u64() % 2) as usize;
        let s_t = 1 + (rng.next_u64() % 2) as usize;
        let c_in = 1 + (rng.next_u64() % 3) as usize;
        let c_out = 1 + (rng.next_u64() % 3) as usize;
        let k_s = 1 + (rng.next_u64() % 3) as usize;
        let spatial = DimSpec::new(k_s, 1, 1, k_s / 2);
        let mut spec = ConvSpec {
            in_channels: c_in,
            out_channels: c_out,
            groups: 1,
            temporal: DimSpec::new(k_t, s_t, d_t, 0),
            spatial_h: spatial,
            spatial_w: spatial,
            has_bias: case % 2 == 0,
            weights: None,
            bias: None,
            state_frames_override: None,
        };
        spec.weights = Some(
            (0..spec.weight_len())
                .map(|_| rng.uniform(-1.0, 1.0))
                .collect(),
        );
        if spec.has_bias {
            spec.bias = Some((0..c_out).map(|_| rng.uniform(-1.0, 1.0)).collect());
        }
        let delay = d_t * (k_t - 1);
        let h = 3 + (rng.next_u64() % 3) as usize;
        let w = 3 + (rng.next_u64() % 3) as usize;
        let total = delay + 1 + 2 * s_t + (rng.next_u64() % 6) as usize;
        let frames = random_stream(&mut rng, total, c_in, h, w);

        let oracle = conv3d(&ClipTensor::from_frames(&frames).unwrap(), &spec, false).unwrap();
        let mut state = spec.init_state(InitScheme::Zeros, None, (h, w)).unwrap();
        let mut emitted = 0usize;
        for (t, frame) in frames.iter().enumerate() {
            let out = spec.step(frame, &mut state).unwrap();
            if let Some(f) = out.frame {
                if out.valid {
                    assert_eq!(
                        t,
                        emitted * s_t + delay,
                        "case {case}: emission step for output {emitted}"
                    );
                    let want = oracle.frame(emitted).unwrap();
                    for (g, o) in f.data().iter().zip(want.data()) {
                        worst = worst.max((g - o).abs());
                    }
                    emitted += 1;
                }
            }
        }
        assert_eq!(emitted, oracle.time(), "case {case}: emission count");
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "criterion 01 single-layer oracle equivalence",
        worst <= 1e-5 && elapsed < 60.0,
        &format!("200 specs, max |dev| = {worst:e} (<= 1e-5), {elapsed:.1}s (< 60s)"),
    );
}

#[test]
fn acceptance_02_end_to_end_x3d_m_equivalence() {
    let started = Instant::now();
    let mut net = x3d(
        X3dVariant::M,
        X3dOptions {
            spatial: Some(56),
            ..Default::default()
        },
    );
    seed_weights(&mut net, 0xACC2);
    let outcome = run_verify(
        &net,
        &VerifyOptions {
            frames: 90,
            seed: 0xACC2,
            tolerance: 1e-4,
            inject_delay_fault: None,
        },
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "criterion 02 end-to-end X3D-M equivalence",
        outcome.passed && elapsed < 300.0,
        &format!(
            "90 frames at 56x56, max |dev| = {:e} (<= 1e-4), first valid step {} (expected {}), {elapsed:.1}s (< 300s)",
            outcome.max_deviation,
            outcome.first_valid_step.unwrap_or(0),
            outcome.expected_first_valid
        ),
    );
}

fn state_sum(report: &CostReport, pred: impl Fn(&str, RowKind) -> bool) -> u64 {
    report
        .rows
        .iter()
        .filter(|r| pred(&r.name, r.kind))
        .map(|r| r.state_floats)
        .sum()
}

#[test]
#[allow(clippy::type_complexity)]
fn acceptance_03_state_ledger_exact_reproduction() {
    let net = builtin_x3d_m();
    let rep = memory_report(&net, CostMode::Continual, 16).unwrap();

    let rows: &[(&str, u64, Box<dyn Fn(&str, RowKind) -> bool>)] = &[
        (
            "conv1/conv_t",
            1_204_224,
            Box::new(|n: &str, _| n == "conv1.t"),
        ),
        (
            "res2/residual_1",
            301_056,
            Box::new(|n: &str, k| n == "res2.b1" && k == RowKind::Residual),
        ),
        (
            "res2/residual_2-3",
            150_528,
            Box::new(|n: &str, k| k == RowKind::Residual && (n == "res2.b2" || n == "res2.b3")),
        ),
        (
            "res2/conv_1-3",
            508_032,
            Box::new(|n: &str, _| n.starts_with("res2.") && n.ends_with(".conv_b")),
        ),
        (
            "res3/residual_1",
            75_264,
            Box::new(|n: &str, k| n == "res3.b1" && k == RowKind::Residual),
        ),
        (
            "res3/residual_2-5",
            150_528,
            Box::new(|n: &str, k| {
                k == RowKind::Residual && n.starts_with("res3.b") && n != "res3.b1"
            }),
        ),
        (
            "res3/conv_1-5",
            846_720,
            Box::new(|n: &str, _| n.starts_with("res3.") && n.ends_with(".conv_b")),
        ),
        (
            "res4/residual_1",
            37_632,
            Box::new(|n: &str, k| n == "res4.b1" && k == RowKind::Residual),
        ),
        (
            "res4/residual_2-11",
            188_160,
            Box::new(|n: &str, k| {
                k == RowKind::Residual && n.starts_with("res4.b") && n != "res4.b1"
            }),
        ),
        (
            "res4/conv_1-11",
            931_392,
            Box::new(|n: &str, _| n.starts_with("res4.") && n.ends_with(".conv_b")),
        ),
        (
            "res5/residual_1",
            18_816,
            Box::new(|n: &str, k| n == "res5.b1" && k == RowKind::Residual),
        ),
        (
            "res5/residual_2-7",
            56_448,
            Box::new(|n: &str, k| {
                k == RowKind::Residual && n.starts_with("res5.b") && n != "res5.b1"
            }),
        ),
        (
            "res5/conv_1-7",
            296_352,
            Box::new(|n: &str, _| n.starts_with("res5.") && n.ends_with(".conv_b")),
        ),
        ("pool5", 6_480, Box::new(|n: &str, _| n == "pool5")),
    ];

    let mut mismatches = Vec::new();
    for (label, want, pred) in rows {
        let got = state_sum(&rep, pred);
        if got != *want {
            mismatches.push(format!("{label}: {got} != {want}"));
        }
    }
    let totals_ok = rep.state_total == 4_771_632 && rep.worst_case_continual() == 5_072_688;
    report(
        "criterion 03 state ledger exact reproduction",
        mismatches.is_empty() && totals_ok,
        &format!(
            "state total {} (want 4,771,632), worst case {} (want 5,072,688), row mismatches: {:?}",
            rep.state_total,
            rep.worst_case_continual(),
            mismatches
        ),
    );
}

#[test]
fn acceptance_04a_clip_mode_memory_16_and_4() {
    let net = builtin_x3d_m();
    let r16 = memory_report(&net, CostMode::Clip, 16)
        .unwrap()
        .worst_case_clip();
    let r4 = memory_report(&net, CostMode::Clip, 4)
        .unwrap()
        .worst_case_clip();
    report(
        "criterion 04a clip-mode worst case (16, 4)",
        r16 == 7_074_816 && r4 == 1_655_808,
        &format!("clip 16 -> {r16} (want 7,074,816), clip 4 -> {r4} (want 1,655,808)"),
    );
}

#[test]
fn acceptance_04b_clip_mode_memory_64() {
    let net = builtin_x3d_m();
    let r64 = memory_report(&net, CostMode::Clip, 64)
        .unwrap()
        .worst_case_clip();
    // The pinned figure uses 63 output frames for the largest transient
    // where the formula gives 64; see the repository notes. The consistent
    // rule that reproduces the 16- and 4-frame figures yields 28,750,848.
    report(
        "criterion 04b clip-mode worst case (64)",
        r64 == 28_449_792,
        &format!("clip 64 -> {r64} (want 28,449,792; formula-consistent value is 28,750,848)"),
    );
}

#[test]
fn acceptance_04c_continual_pool_size_variants() {
    let net = builtin_x3d_m();
    let p4 = memory_report(&net, CostMode::Continual, 4)
        .unwrap()
        .worst_case_continual();
    let p64 = memory_report(&net, CostMode::Continual, 64)
        .unwrap()
        .worst_case_continual();
    report(
        "criterion 04c continual worst case (pool 4, 64)",
        p4 == 5_067_504 && p64 == 5_093_424,
        &format!("pool 4 -> {p4} (want 5,067,504), pool 64 -> {p64} (want 5,093,424)"),
    );
}

#[test]
fn acceptance_05_receptive_field_analysis() {
    let mut detail = String::new();
    let mut ok = true;
    for (variant, r, p, t) in [
        (X3dVariant::S, 69usize, 28usize, 40usize),
        (X3dVariant::M, 72, 28, 43),
        (X3dVariant::L, 130, 57, 72),
    ] {
        let s = analyze(&x3d(variant, X3dOptions::default())).unwrap();
        let here = s.receptive_field == r && s.aggregate_padding == p && s.transient_len == t;
        ok &= here;
        detail.push_str(&format!(
            "{}: r_T {} p_T {} transient {}; ",
            variant.name(),
            s.receptive_field,
            s.aggregate_padding,
            s.transient_len
        ));
    }
    report(
        "criterion 05 receptive fields {69,72,130}/{28,28,57}/{40,43,72}",
        ok,
        &detail,
    );
}

#[test]
fn acceptance_06_residual_memory_share() {
    let rep = memory_report(&builtin_x3d_m(), CostMode::Continual, 16).unwrap();
    let fraction = rep.residual_fraction();
    report(
        "criterion 06 residual state share",
        (fraction - 0.205).abs() <= 0.002,
        &format!("residual/state = {fraction:.4} (want 0.205 +/- 0.002)"),
    );
}

#[test]
fn acceptance_07a_clip_flops_total() {
    let rep = memory_report(&builtin_x3d_m(), CostMode::Clip, 16).unwrap();
    let macs = rep.macs_clip as f64;
    let all = (rep.macs_clip + rep.elementwise_clip + rep.pool_ops_clip) as f64;
    let target = 4.97e9;
    let rel = (macs - target) / target;
    report(
        "criterion 07a clip FLOPs within 10% of 4.97G",
        rel.abs() <= 0.10,
        &format!(
            "MAC total {macs:.4e} ({:+.1}% vs 4.97e9; with elementwise and pooling ops {all:.4e}, {:+.1}%)",
            rel * 100.0,
            (all - target) / target * 100.0
        ),
    );
}

#[test]
fn acceptance_07b_frame_flops_total() {
    let rep = memory_report(&builtin_x3d_m(), CostMode::Continual, 16).unwrap();
    let macs = rep.macs_frame as f64;
    let all = (rep.macs_frame + rep.elementwise_frame + rep.pool_ops_frame) as f64;
    let target = 0.33e9;
    let rel = (macs - target) / target;
    report(
        "criterion 07b frame FLOPs within 10% of 0.33G",
        rel.abs() <= 0.10,
        &format!(
            "MAC total {macs:.4e} ({:+.1}% vs 3.3e8; with elementwise and pooling ops {all:.4e}, {:+.1}%)",
            rel * 100.0,
            (all - target) / target * 100.0
        ),
    );
}

#[test]
fn acceptance_07c_per_layer_clip_frame_ratio() {
    let rep = memory_report(&builtin_x3d_m(), CostMode::Clip, 16).unwrap();
    let mut checked = 0;
    let mut bad = Vec::new();
    for row in rep.rows.iter().filter(|r| r.kind == RowKind::Conv) {
        checked += 1;
        if row.macs_clip != row.macs_frame * row.temporal_out {
            bad.push(row.name.clone());
        }
    }
    report(
        "criterion 07c per-conv clip/frame FLOP ratio == n_T",
        checked > 0 && bad.is_empty(),
        &format!("{checked} conv layers checked, exact for all; violations: {bad:?}"),
    );
}

#[test]
fn acceptance_07d_network_flop_ratio() {
    let rep = memory_report(&builtin_x3d_m(), CostMode::Clip, 16).unwrap();
    let ratio = rep.macs_clip as f64 / rep.macs_frame as f64;
    let rel = (ratio - 15.06) / 15.06;
    report(
        "criterion 07d network clip/frame ratio within 5% of 15.06",
        rel.abs() <= 0.05,
        &format!("ratio {ratio:.2} ({:+.1}% vs 15.06)", rel * 100.0),
    );
}

#[test]
fn acceptance_08_transient_boundary_x3d_s() {
    let mut net = x3d(
        X3dVariant::S,
        X3dOptions {
            spatial: Some(64),
            ..Default::default()
        },
    );
    seed_weights(&mut net, 0xACC8);

    let zeros = transient_trace(
        &net,
        &TransientOptions {
            init: InitScheme::Zeros,
            frames: 48,
            seed: 0xACC8,
        },
    )
    .unwrap();
    let early_all_invalid = zeros.rows.iter().take(40).all(|r| !r.valid);
    let boundary_ok = zeros.first_valid_step == Some(41) && early_all_invalid;

    let replicate = transient_trace(
        &net,
        &TransientOptions {
            init: InitScheme::Replicate,
            frames: 4,
            seed: 0xACC8,
        },
    )
    .unwrap();
    let first = &replicate.rows[0];
    let replicate_ok = first.valid && first.deviation.map(|d| d <= 1e-4).unwrap_or(false);

    report(
        "criterion 08 transient boundary on X3D-S",
        boundary_ok && replicate_ok,
        &format!(
            "zeros init: first valid step {:?} (want 41), steps 1-40 invalid: {early_all_invalid}; \
             replicate init: first output valid with |dev vs boring-clip oracle| = {:?} (<= 1e-4)",
            zeros.first_valid_step,
            first.deviation
        ),
    );
}

/// Random toy network builder shared by the measured-state audit.
fn random_audit_net(seed: u64) -> NetworkSpec {
    let mut rng = SplitMix64::new(seed);
    let channels = 1 + (rng.next_u64() % 3) as usize;
    let mut c = channels;
    let mut layers = Vec::new();
    for i in 0..(1 + (rng.next_u64() % 4) as usize) {
        match rng.next_u64() % 4 {
            0 => {
                let out = 1 + (rng.next_u64() % 4) as usize;
                let k_t = [1usize, 2, 3, 5][(rng.next_u64() % 4) as usize];
                let d_t = 1 + (rng.next_u64() % 2) as usize;
                layers.push(Layer::new(
                    format!("conv{i}"),
                    LayerKind::Conv3d(ConvSpec {
                        in_channels: c,
                        out_channels: out,
                        groups: 1,
                        temporal: DimSpec::new(k_t, 1, d_t, if k_t > 1 { 1 } else { 0 }),
                        spatial_h: DimSpec::new(3, 1, 1, 1),
                        spatial_w: DimSpec::new(3, 1, 1, 1),
                        has_bias: false,
                        weights: None,
                        bias: None,
                        state_frames_override: None,
                    }),
                ));
                c = out;
            }
            1 => {
                layers.push(Layer::new(
                    format!("norm{i}"),
                    LayerKind::Norm(NormSpec::identity(c, 1e-5)),
                ));
                layers.push(Layer::new(
                    format!("act{i}"),
                    LayerKind::Activation(Activation::Relu),
                ));
            }
            2 => {
                layers.push(Layer::new(
                    format!("se{i}"),
                    LayerKind::Se(SeSpec::new(c, 2)),
                ));
            }
            _ => {
                let mid = 1 + (rng.next_u64() % 4) as usize;
                let inner = vec![
                    Layer::new(
                        format!("res{i}.a"),
                        LayerKind::Conv3d(ConvSpec {
                            in_channels: c,
                            out_channels: mid,
                            groups: 1,
                            temporal: DimSpec::new(3, 1, 1, 1),
                            spatial_h: DimSpec::plain(1),
                            spatial_w: DimSpec::plain(1),
                            has_bias: false,
                            weights: None,
                            bias: None,
                            state_frames_override: None,
                        }),
                    ),
                    Layer::new(
                        format!("res{i}.b"),
                        LayerKind::Conv3d(ConvSpec {
                            in_channels: mid,
                            out_channels: c,
                            groups: 1,
                            temporal: DimSpec::plain(1),
                            spatial_h: DimSpec::plain(1),
                            spatial_w: DimSpec::plain(1),
                            has_bias: false,
                            weights: None,
                            bias: None,
                            state_frames_override: None,
                        }),
                    ),
                ];
                layers.push(Layer::new(
                    format!("res{i}"),
                    LayerKind::Residual(ResidualSpec {
                        inner,
                        skip: vec![],
                    }),
                ));
            }
        }
    }
    let pool_k = 2 + (rng.next_u64() % 4) as usize;
    layers.push(Layer::new(
        "pool",
        LayerKind::GlobalPool {
            kind: PoolKind::Avg,
            temporal_kernel: pool_k,
        },
    ));
    layers.push(Layer::new(
        "head",
        LayerKind::Linear(LinearSpec {
            in_features: c,
            out_features: 3,
            has_bias: true,
            weights: None,
            bias: None,
        }),
    ));
    let mut net = NetworkSpec::new(
        FrameShape {
            channels,
            height: 6,
            width: 6,
        },
        layers,
    );
    seed_weights(&mut net, seed);
    net
}

#[test]
fn acceptance_09_measured_state_audit() {
    let mut audited = 0;
    for seed in 0..50u64 {
        let net = random_audit_net(0x900 + seed);
        let co_spec = convert_to_continual(&net).unwrap();
        let pool_k = co_spec
            .layers
            .iter()
            .find_map(|l| match l.kind {
                LayerKind::GlobalPool {
                    temporal_kernel, ..
                } => Some(temporal_kernel),
                _ => None,
            })
            .unwrap();
        let rep = memory_report(&co_spec, CostMode::Continual, pool_k).unwrap();
        let co = CoNetwork::compile(&co_spec, InitScheme::Zeros, None).unwrap();
        assert_eq!(
            co.state_floats(),
            rep.state_total,
            "seed {seed}: compiled state diverges from the report"
        );
        audited += 1;
    }
    report(
        "criterion 09 measured-state audit",
        audited == 50,
        &format!("{audited}/50 random specs hold exactly the reported state floats"),
    );
}

#[test]
fn acceptance_10_throughput_direction() {
    // Toy network with a 16-frame window: pointwise convs plus a temporal
    // global pool, so the clip-mode window length equals 16.
    let mut net = NetworkSpec::new(
        FrameShape {
            channels: 3,
            height: 16,
            width: 16,
        },
        vec![
            Layer::new(
                "c1",
                LayerKind::Conv3d(ConvSpec {
                    in_channels: 3,
                    out_channels: 8,
                    groups: 1,
                    temporal: DimSpec::plain(1),
                    spatial_h: DimSpec::new(3, 1, 1, 1),
                    spatial_w: DimSpec::new(3, 1, 1, 1),
                    has_bias: false,
                    weights: None,
                    bias: None,
                    state_frames_override: None,
                }),
            ),
            Layer::new("a1", LayerKind::Activation(Activation::Relu)),
            Layer::new(
                "c2",
                LayerKind::Conv3d(ConvSpec {
                    in_channels: 8,
                    out_channels: 8,
                    groups: 1,
                    temporal: DimSpec::plain(1),
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
                    temporal_kernel: 16,
                },
            ),
            Layer::new(
                "head",
                LayerKind::Linear(LinearSpec {
                    in_features: 8,
                    out_features: 4,
                    has_bias: true,
                    weights: None,
                    bias: None,
                }),
            ),
        ],
    );
    seed_weights(&mut net, 0xACC10);
    let opts = BenchOptions {
        streams: 1,
        repetitions: 3,
        warmup: 2,
        frames: 12,
        seed: 0xACC10,
        clip_size: 0,
    };
    let continual = run_bench(&net, BenchMode::Continual, &opts).unwrap();
    let clip = run_bench(&net, BenchMode::Clip, &opts).unwrap();
    let ratio = continual.mean_predictions_per_sec / clip.mean_predictions_per_sec;
    report(
        "criterion 10 throughput direction",
        ratio > 1.0,
        &format!(
            "continual {:.1}/s vs clip {:.1}/s, ratio {ratio:.2}x (> 1 required; published \
             CPU-scale reference is 4-9x at full model size)",
            continual.mean_predictions_per_sec, clip.mean_predictions_per_sec
        ),
    );
}
