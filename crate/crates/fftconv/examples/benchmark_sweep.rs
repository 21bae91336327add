//! A small benchmark sweep showing the headline asymmetry: direct
//! convolution cost grows with the square of the kernel edge while the
//! frequency-domain cost barely moves, because the transform size is pinned
//! by the input, not the kernel.
//!
//! Run with `cargo run --release --example benchmark_sweep`.

use fftconv::bench::{run_bench, run_verify, to_csv, BenchConfig, GridSpec, Method, VerifyConfig};
use fftconv::Result;

fn main() -> Result<()> {
    // Correctness first; timing a wrong answer is worse than no timing.
    let check = run_verify(&VerifyConfig { seed: 9, trials: 10 })?;
    assert!(check.passed(), "verification failed: {:?}", check.failures);
    println!("verified {} random problems, all passes agree\n", check.problems);

    let grid = GridSpec {
        s: vec![4],
        f: vec![16],
        fp: vec![16],
        k: vec![3, 5, 7, 9],
        y: vec![16],
    };
    let cfg = BenchConfig { trials: 3, seed: 2 };
    let records = run_bench(&grid, &cfg)?;

    println!("fprop, 16x16 output, batch 4, 16 -> 16 planes:");
    println!("{:>8} {:>12} {:>12} {:>10}", "kernel", "direct us", "fft us", "speedup");
    for &k in &grid.k {
        let pick = |m: Method| -> f64 {
            records
                .iter()
                .filter(|r| {
                    r.problem.k_h == k && r.method == m && r.pass.name() == "fprop"
                })
                .map(|r| r.time_us)
                .sum()
        };
        let direct = pick(Method::Direct);
        let fft = pick(Method::FftRadix2);
        println!(
            "{:>5}x{:<2} {direct:>12.1} {fft:>12.1} {:>9.1}x",
            k, k, direct / fft
        );
    }

    // The CSV report carries every measured cell plus derived throughput.
    let csv = to_csv(&records, &cfg);
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    println!("\nfull report: {rows} rows, first three:");
    for line in csv.lines().filter(|l| !l.starts_with('#')).take(4) {
        println!("  {line}");
    }
    Ok(())
}
