//! Forward propagation in the frequency domain, checked against the direct
//! loop nest. Shows both transform paths, the per-plan tolerance, and how the
//! engine's work buffers amortize across calls.
//!
//! Run with `cargo run --example frequency_convolution`.

use fftconv::conv_engine::{direct_pass, ConvEngine, ConvPlan, FftPath, Pass};
use fftconv::direct_conv::{max_rel_error, ConvProblem};
use fftconv::tensor::random_tensor;
use fftconv::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // 2 images, 3 input planes, 4 output planes, 13x13 input, 5x5 kernels.
    let problem = ConvProblem::new(2, 3, 4, 13, 13, 5, 5);
    let x = random_tensor(problem.x_dims(), &mut rng);
    let wgt = random_tensor(problem.w_dims(), &mut rng);
    let gy = random_tensor(problem.y_dims(), &mut rng);

    let reference = direct_pass(Pass::Fprop, &problem, &x, &wgt, &gy)?;
    println!(
        "problem: {}x{} input, {}x{} kernel, {} -> {} planes, batch {}",
        problem.h, problem.w, problem.k_h, problem.k_w, problem.f, problem.fp, problem.s
    );
    println!("output dims: {:?}\n", reference.dims);

    let mut engine = ConvEngine::new();
    for path in FftPath::ALL {
        let plan = ConvPlan::minimal(problem, path)?;
        let y = engine.fprop(&plan, &x, &wgt)?;
        println!(
            "{:<7} transform {:>2}x{:<2} workspace {:>6} bytes  max rel err {:.2e} (tol {:.1e})",
            path.name(),
            plan.n_h,
            plan.n_w,
            plan.buffer_bytes(),
            max_rel_error(&y, &reference),
            plan.tolerance()
        );
    }

    // A transform larger than necessary changes nothing but the cost: the
    // extra bins hold the spectrum of the same zero padding.
    let oversized = ConvPlan::new(problem, FftPath::Radix2Elided, 32, 32)?;
    let y = engine.fprop(&oversized, &x, &wgt)?;
    println!(
        "oversized 32x32 transform: max rel err {:.2e}",
        max_rel_error(&y, &reference)
    );

    // The engine keeps its scratch between calls; capacity settles after
    // the largest problem seen.
    println!(
        "\nengine scratch after those calls: {} complex elements",
        engine.buffer_capacity()
    );
    let before = engine.buffer_capacity();
    for _ in 0..3 {
        let plan = ConvPlan::minimal(problem, FftPath::Radix2Elided)?;
        engine.fprop(&plan, &x, &wgt)?;
    }
    assert_eq!(engine.buffer_capacity(), before);
    println!("three more calls allocate nothing new");
    Ok(())
}
