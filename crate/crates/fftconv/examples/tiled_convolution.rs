//! Tiling: convolve a long signal in overlapping chunks so each chunk fits a
//! small transform. The decomposition is exact, and the cost model explains
//! why the sweet spot for the tile length sits near the kernel length, far
//! below the signal length.
//!
//! Run with `cargo run --example tiled_convolution`.

use fftconv::conv_engine::{ConvEngine, ConvPlan, FftPath, TilePair};
use fftconv::direct_conv::{fprop_problem, max_rel_error, ConvProblem};
use fftconv::tensor::random_tensor;
use fftconv::tiling::{conv1d_valid, optimal_tile, tile_cost_model, tiled_conv1d};
use fftconv::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    // 1-d: every tile length gives the same outputs.
    let n = 96;
    let w = 7;
    let x: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let c: Vec<f32> = (0..w).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let whole = conv1d_valid(&x, &c);
    let mut worst = 0.0f32;
    for d in 1..=(n - w + 1) {
        let tiled = tiled_conv1d(&x, &c, d)?;
        let e = tiled
            .iter()
            .zip(&whole)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        worst = worst.max(e);
    }
    println!("1-d, n={n} w={w}: worst deviation over all tile lengths {worst:.1e}");

    // The model behind the choice of d: tiles of length d + w - 1 cost
    // roughly their own size times its log, and n/d of them are needed.
    println!("\ncost model for n=1024, w=8:");
    for d in [2usize, 4, 8, 16, 30, 64, 256, 1017] {
        println!("  d={d:>5}: {:>12.0}", tile_cost_model(1024, 8, d));
    }
    let best = optimal_tile(1024, 8);
    println!("argmin d = {best} (kernel is 8 long)");

    // 2-d through the engine: the padded input never materializes; each
    // tile loads its window with clipped reads and runs the small plan.
    let problem = ConvProblem::new(1, 2, 2, 40, 40, 5, 5);
    let x = random_tensor(problem.x_dims(), &mut rng);
    let wgt = random_tensor(problem.w_dims(), &mut rng);
    let reference = fprop_problem(&problem, &x, &wgt)?;

    let mut engine = ConvEngine::new();
    let untiled = ConvPlan::minimal(problem, FftPath::Radix2Elided)?;
    println!(
        "\n2-d fprop on {}x{}: untiled transform {}x{}",
        problem.h, problem.w, untiled.n_h, untiled.n_w
    );

    for d in [8usize, 12, 18] {
        let window = (d + problem.k_h - 1).next_power_of_two();
        let plan = ConvPlan::tiled(
            problem,
            FftPath::Radix2Elided,
            window,
            window,
            TilePair { d_h: d, d_w: d },
        )?;
        let y = engine.fprop(&plan, &x, &wgt)?;
        println!(
            "  {d:>2}x{d:<2} tiles, {window:>2}x{window:<2} transforms: max rel err {:.2e}",
            max_rel_error(&y, &reference)
        );
    }
    Ok(())
}
