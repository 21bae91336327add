//! Plan search: enumerate candidate transform sizes and strategies for one
//! problem, time them against the direct reference, and keep the winner in a
//! cache that survives restarts.
//!
//! Run with `cargo run --release --example autotune`.

use fftconv::autotuner::{smooth_sizes, tune, PlanCache, TuneConfig};
use fftconv::conv_engine::Pass;
use fftconv::direct_conv::ConvProblem;
use fftconv::Result;

fn main() -> Result<()> {
    // A 13x13 input pads to at least 15x15 for a 3x3 kernel; candidate
    // extents are the 7-smooth integers up to the next power of two.
    println!("7-smooth sizes covering 13: {:?}", smooth_sizes(13));
    println!("7-smooth sizes covering 15: {:?}", smooth_sizes(15));
    println!("7-smooth sizes covering 65: {:?}\n", smooth_sizes(65));

    let problem = ConvProblem::new(4, 4, 4, 13, 13, 3, 3);
    let cfg = TuneConfig { budget: 5, seed: 1 };
    let mut cache = PlanCache::new();

    let report = tune(&mut cache, &problem, Pass::Fprop, &cfg)?;
    println!(
        "tuned fprop for 13x13, 3x3 kernel: {} candidates measured",
        report.candidates.len()
    );
    let mut sorted = report.candidates.clone();
    sorted.sort_by(|a, b| a.micros.total_cmp(&b.micros));
    println!("fastest five:");
    for c in sorted.iter().take(5) {
        let tile = match c.plan.tiling {
            None => "untiled".to_string(),
            Some(t) => format!("{}x{} tiles", t.d_h, t.d_w),
        };
        println!(
            "  {:>3}x{:<3} {:<7} {:<9} {:<11} {:>8.1} us",
            c.plan.n_h,
            c.plan.n_w,
            c.plan.fft_path.name(),
            c.plan.gemm.name(),
            tile,
            c.micros
        );
    }

    // Asking again is free: the cache answers.
    let again = tune(&mut cache, &problem, Pass::Fprop, &cfg)?;
    assert!(again.cached);
    println!(
        "\nsecond call: cache hit, winner {}x{} at {:.1} us",
        again.winner.plan.n_h, again.winner.plan.n_w, again.winner.micros
    );

    // The cache is a plain text file; identical caches serialize to
    // identical bytes, and timings reload bit-exactly.
    let path = std::env::temp_dir().join("fftconv-example-plans.tsv");
    cache.save(&path)?;
    let text = std::fs::read_to_string(&path)?;
    println!("\ncache file:");
    for line in text.lines() {
        println!("  {line}");
    }
    let reloaded = PlanCache::load(&path)?;
    assert_eq!(reloaded.len(), cache.len());
    let _ = std::fs::remove_file(&path);
    Ok(())
}
