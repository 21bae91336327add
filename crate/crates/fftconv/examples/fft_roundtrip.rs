//! The 1-d transform toolbox: decimation-in-time, the reorder-free
//! decimation-in-frequency variant, and the mixed-radix path for lengths
//! that are not powers of two.
//!
//! Run with `cargo run --example fft_roundtrip`.

use fftconv::fft1d::{
    bit_reverse_permute, dft_naive, fft_dif_noreorder, fft_dit, fft_smooth,
    ifft_dit_from_bitreversed, ifft_smooth, Radix2Plan, SmoothPlan,
};
use fftconv::Result;
use num_complex::Complex32;

fn max_diff(a: &[Complex32], b: &[Complex32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f32::max)
}

fn main() -> Result<()> {
    // The worked example: [1, 2, 3, 4] transforms to [10, -2+2i, -2, -2-2i].
    let x: Vec<Complex32> = [1.0f32, 2.0, 3.0, 4.0]
        .iter()
        .map(|&v| Complex32::new(v, 0.0))
        .collect();
    let plan = Radix2Plan::new(4)?;
    let spectrum = fft_dit(&x, &plan)?;
    println!("fft([1,2,3,4]):");
    for (k, v) in spectrum.iter().enumerate() {
        println!("  bin {k}: {:6.2} {:+6.2}i", v.re, v.im);
    }

    // The same spectrum from the reorder-free forward pass comes out in
    // bit-reversed bin order. Convolution never needs to undo that order:
    // the matching inverse consumes it directly. Cross-checking against
    // the naive DFT here is the only place the permutation is applied.
    let scrambled = fft_dif_noreorder(&x, &plan)?;
    println!("\nreorder-free bins (bit-reversed): ");
    for v in &scrambled {
        print!(" {:5.1}{:+4.1}i", v.re, v.im);
    }
    let mut unscrambled = scrambled.clone();
    bit_reverse_permute(&mut unscrambled);
    println!(
        "\nafter permutation, against the naive DFT: max diff {:.2e}",
        max_diff(&unscrambled, &dft_naive(&x))
    );

    // Round trip without ever reordering.
    let back = ifft_dit_from_bitreversed(&scrambled, &plan)?;
    println!(
        "round trip through the scrambled spectrum: max diff {:.2e}",
        max_diff(&back, &x)
    );

    // Lengths with factors 3, 5, 7 take the mixed-radix path.
    for n in [6usize, 15, 21, 35, 105] {
        let plan = SmoothPlan::new(n)?;
        let x: Vec<Complex32> = (0..n)
            .map(|j| Complex32::new((j as f32 * 0.37).sin(), (j as f32 * 0.19).cos()))
            .collect();
        let spec = fft_smooth(&x, &plan)?;
        let err_fwd = max_diff(&spec, &dft_naive(&x));
        let back = ifft_smooth(&spec, &plan)?;
        let err_rt = max_diff(&back, &x);
        println!("n={n:>3}: forward vs naive {err_fwd:.2e}, round trip {err_rt:.2e}");
    }
    Ok(())
}
