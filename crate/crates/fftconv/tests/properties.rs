//! Randomized structural invariants. Each property is a statement from the
//! design that must hold for every input, not just the worked examples:
//! padding then clipping is the identity, the layout transposes invert each
//! other, transforms conserve energy, tiles partition the output exactly.

use num_complex::Complex32;
use proptest::prelude::*;

use fftconv::fft1d::{is_7smooth, ComplexPlan};
use fftconv::rfft::{FreqLayout, RfftPlan};
use fftconv::tensor::{
    clip, transpose_bdhw_hwbd, transpose_hwbd_bdhw, FreqOrder, FreqTensor, Layout, RealTensor4,
};
use fftconv::tiling::TileSpec;

fn smooth_lengths() -> impl Strategy<Value = usize> {
    prop::sample::select(
        (2usize..=128)
            .filter(|&n| is_7smooth(n))
            .collect::<Vec<_>>(),
    )
}

proptest! {
    // Transforming a plane inside a larger extent and clipping the inverse
    // back down must reproduce the plane: zero padding is invisible.
    #[test]
    fn pad_clip_round_trip_is_identity(
        h in 1usize..=12,
        w in 1usize..=12,
        extra_h in 0usize..=9,
        extra_w in 0usize..=9,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let plane: Vec<f32> = (0..h * w).map(|_| rng.gen_range(-1.0f32..1.0)).collect();

        let smooth = |n: usize| (n..).find(|&m| is_7smooth(m)).unwrap();
        let n_h = smooth(h + extra_h);
        let n_w = smooth(w + extra_w);
        let plan = RfftPlan::new(n_h, n_w, FreqLayout::RowMajorFreq).unwrap();
        let spec = plan.rfft2d(&plane, h, w).unwrap();
        let full = plan.irfft2d(&spec, n_h, n_w).unwrap();

        let padded = RealTensor4::from_vec([1, 1, n_h, n_w], full).unwrap();
        let clipped = clip(&padded, h, w).unwrap();
        for (a, b) in plane.iter().zip(&clipped.data) {
            prop_assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        // The padding region itself must come back as zeros.
        for r in 0..n_h {
            for c in 0..n_w {
                if r >= h || c >= w {
                    prop_assert!(padded.at(0, 0, r, c).abs() < 1e-5);
                }
            }
        }
    }

    // The two layout transposes are inverses, for either bin order tag.
    #[test]
    fn layout_transposes_invert_each_other(
        a in 1usize..=3,
        b in 1usize..=3,
        hb in 1usize..=6,
        wb in 1usize..=6,
        bitrev in any::<bool>(),
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dims = [a, b, hb, wb];
        let len = a * b * hb * wb;
        let data: Vec<Complex32> = (0..len)
            .map(|_| Complex32::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let order = if bitrev { FreqOrder::BitReversedDif } else { FreqOrder::Natural };
        let t = FreqTensor { dims, layout: Layout::Bdhw, order, data };

        let swapped = transpose_bdhw_hwbd(&t).unwrap();
        prop_assert_eq!(swapped.layout, Layout::Hwbd);
        prop_assert_eq!(swapped.order, order);
        let back = transpose_hwbd_bdhw(&swapped).unwrap();
        prop_assert_eq!(back.layout, Layout::Bdhw);
        prop_assert_eq!(back.dims, dims);
        prop_assert_eq!(back.data, t.data);
    }

    // Energy is conserved by the forward transform, for every supported
    // length, not just powers of two.
    #[test]
    fn parseval_holds_for_every_supported_length(
        n in smooth_lengths(),
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Complex32> = (0..n)
            .map(|_| Complex32::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let plan = ComplexPlan::new(n).unwrap();
        let mut spec = x.clone();
        plan.forward_inplace(&mut spec);

        let time: f64 = x.iter().map(|v| v.norm_sqr() as f64).sum();
        let freq: f64 = spec.iter().map(|v| v.norm_sqr() as f64).sum::<f64>() / n as f64;
        prop_assert!(((time - freq) / time.max(1e-12)).abs() < 1e-4, "{time} vs {freq}");
    }

    // Tile ranges cover [0, m) exactly once, whatever (n, w, d) is chosen.
    #[test]
    fn tiles_partition_the_output(
        w in 1usize..=16,
        extra in 0usize..=64,
        d_pick in 0usize..=63,
    ) {
        let n = w + extra;
        let m = n - w + 1;
        let d = 1 + d_pick % m;
        let spec = TileSpec::new(n, w, d).unwrap();

        let mut covered = vec![0u32; m];
        for k in 0..spec.tile_count {
            let start = k * d;
            let stop = (start + d).min(m);
            prop_assert!(start < m, "tile {k} starts past the output");
            // Each tile reads d + w - 1 inputs, clipped at the signal end.
            prop_assert!(spec.tile_input_len == d + w - 1);
            for v in &mut covered[start..stop] {
                *v += 1;
            }
        }
        prop_assert!(covered.iter().all(|&c| c == 1), "coverage {covered:?}");
    }
}
