//! Single-layer oracle equivalence: the continual convolution must emit
//! exactly what the clip-wise convolution computes, at exactly the
//! predicted step.

use coconv_core::conv::{conv3d, ConvSpec, InitScheme};
use coconv_core::rng::SplitMix64;
use coconv_core::synth::{random_frame, random_stream};
use coconv_core::tensor::{ClipTensor, DimSpec, FrameTensor};
use proptest::prelude::*;

fn random_conv_spec(rng: &mut SplitMix64) -> ConvSpec {
    let k_t = [1usize, 2, 3, 5][(rng.next_u64() % 4) as usize];
    let d_t = 1 + (rng.next_u64() % 2) as usize;
    let s_t = 1 + (rng.next_u64() % 2) as usize;
    let c_in = 1 + (rng.next_u64() % 3) as usize;
    let c_out = 1 + (rng.next_u64() % 3) as usize;
    let k_s = 1 + (rng.next_u64() % 3) as usize;
    let pad_s = (rng.next_u64() % k_s as u64) as usize;
    let has_bias = rng.next_u64().is_multiple_of(2);
    let spatial = DimSpec::new(k_s, 1, 1, pad_s);
    let mut spec = ConvSpec {
        in_channels: c_in,
        out_channels: c_out,
        groups: 1,
        temporal: DimSpec::new(k_t, s_t, d_t, 0),
        spatial_h: spatial,
        spatial_w: spatial,
        has_bias,
        weights: None,
        bias: None,
        state_frames_override: None,
    };
    spec.weights = Some(
        (0..spec.weight_len())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect(),
    );
    if has_bias {
        spec.bias = Some((0..c_out).map(|_| rng.uniform(-1.0, 1.0)).collect());
    }
    spec
}

/// Stream a spec and collect (step, frame) for every valid emission.
fn stream_valid_outputs(
    spec: &ConvSpec,
    frames: &[FrameTensor],
    hw: (usize, usize),
) -> Vec<(usize, FrameTensor)> {
    let mut state = spec.init_state(InitScheme::Zeros, None, hw).unwrap();
    let mut out = Vec::new();
    for (t, frame) in frames.iter().enumerate() {
        let step = spec.step(frame, &mut state).unwrap();
        if let Some(f) = step.frame {
            if step.valid {
                out.push((t, f));
            }
        }
    }
    out
}

#[test]
fn two_hundred_random_specs_match_the_clip_oracle() {
    let mut rng = SplitMix64::new(0xC0C0);
    for case in 0..200 {
        let spec = random_conv_spec(&mut rng);
        let delay = spec.temporal.dilation * (spec.temporal.kernel - 1);
        let h = 3 + (rng.next_u64() % 3) as usize;
        let w = 3 + (rng.next_u64() % 3) as usize;
        let total = delay + 1 + (rng.next_u64() % 8) as usize + 2 * spec.temporal.stride;
        let frames = random_stream(&mut rng, total, spec.in_channels, h, w);

        let clip = ClipTensor::from_frames(&frames).unwrap();
        let oracle = conv3d(&clip, &spec, false).unwrap();
        let got = stream_valid_outputs(&spec, &frames, (h, w));

        assert_eq!(
            got.len(),
            oracle.time(),
            "case {case}: emission count mismatch for {:?}",
            spec.temporal
        );
        for (j, (step, frame)) in got.iter().enumerate() {
            assert_eq!(
                *step,
                j * spec.temporal.stride + delay,
                "case {case}: output {j} emitted at the wrong step"
            );
            let want = oracle.frame(j).unwrap();
            for (g, o) in frame.data().iter().zip(want.data()) {
                assert!(
                    (g - o).abs() <= 1e-5,
                    "case {case}: value mismatch at output {j}: {g} vs {o}"
                );
            }
        }
    }
}

#[test]
fn zeros_init_matches_left_padded_oracle_for_random_specs() {
    let mut rng = SplitMix64::new(0xAB);
    for _ in 0..50 {
        let mut spec = random_conv_spec(&mut rng);
        spec.temporal.stride = 1;
        let delay = spec.temporal.dilation * (spec.temporal.kernel - 1);
        let h = 3;
        let w = 4;
        let frames = random_stream(&mut rng, delay + 6, spec.in_channels, h, w);

        let mut padded: Vec<FrameTensor> = (0..delay)
            .map(|_| FrameTensor::zeros(spec.in_channels, h, w))
            .collect();
        padded.extend(frames.iter().cloned());
        let oracle = conv3d(&ClipTensor::from_frames(&padded).unwrap(), &spec, false).unwrap();

        let mut state = spec.init_state(InitScheme::Zeros, None, (h, w)).unwrap();
        for (t, frame) in frames.iter().enumerate() {
            let out = spec.step(frame, &mut state).unwrap().frame.unwrap();
            let want = oracle.frame(t).unwrap();
            for (g, o) in out.data().iter().zip(want.data()) {
                assert!((g - o).abs() <= 1e-5);
            }
        }
    }
}

#[test]
fn replicate_init_is_the_boring_stream_fixpoint() {
    let mut rng = SplitMix64::new(0xBEEF);
    for _ in 0..25 {
        let mut spec = random_conv_spec(&mut rng);
        spec.temporal.stride = 1;
        let h = 3;
        let w = 3;
        let seed = random_frame(&mut rng, spec.in_channels, h, w);

        let mut replicated = spec
            .init_state(InitScheme::Replicate, Some(&seed), (h, w))
            .unwrap();
        let first = spec.step(&seed, &mut replicated).unwrap();
        assert!(first.valid);

        let window = spec.temporal.dilation * (spec.temporal.kernel - 1) + 1;
        let boring = ClipTensor::from_frames(&vec![seed.clone(); window]).unwrap();
        let oracle = conv3d(&boring, &spec, false).unwrap();
        assert_eq!(oracle.time(), 1);
        for (g, o) in first
            .frame
            .unwrap()
            .data()
            .iter()
            .zip(oracle.frame(0).unwrap().data())
        {
            assert!((g - o).abs() <= 1e-5);
        }
    }
}

proptest! {
    /// Splitting a clip into frames and reassembling reproduces identical bytes.
    #[test]
    fn clip_frame_round_trip(
        c in 1usize..4,
        t in 1usize..5,
        h in 1usize..4,
        w in 1usize..4,
        seed in 0u64..1000,
    ) {
        let mut rng = SplitMix64::new(seed);
        let frames = random_stream(&mut rng, t, c, h, w);
        let clip = ClipTensor::from_frames(&frames).unwrap();
        let back = clip.clone().into_frames();
        prop_assert_eq!(frames, back);
    }

    /// State float count always equals d_T*(k_T-1)*c_out*n_h*n_w.
    #[test]
    fn state_size_formula_holds(seed in 0u64..500) {
        let mut rng = SplitMix64::new(seed);
        let spec = random_conv_spec(&mut rng);
        let h = 4;
        let w = 5;
        let state = spec.init_state(InitScheme::Zeros, None, (h, w)).unwrap();
        let (n_h, n_w) = spec.spatial_out(h, w).unwrap();
        let want = spec.temporal.dilation
            * (spec.temporal.kernel - 1)
            * spec.out_channels
            * n_h
            * n_w;
        prop_assert_eq!(state.state_floats(), want);
    }
}
