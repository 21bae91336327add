//! The two backward passes, validated three ways: frequency domain against
//! the direct loop nest against central finite differences of the forward
//! pass. The finite-difference check is the one that catches a wrong
//! convolution flavor (correlation where convolution belongs, or a
//! mis-clipped output window), because it only trusts fprop.
//!
//! Run with `cargo run --example gradients`.

use fftconv::conv_engine::{direct_pass, ConvEngine, ConvPlan, FftPath, Pass};
use fftconv::direct_conv::{
    finite_diff_input_gradient, finite_diff_weight_gradient, max_rel_error, ConvProblem,
};
use fftconv::tensor::random_tensor;
use fftconv::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let problem = ConvProblem::new(2, 2, 3, 6, 6, 3, 3);
    let x = random_tensor(problem.x_dims(), &mut rng);
    let wgt = random_tensor(problem.w_dims(), &mut rng);
    let gy = random_tensor(problem.y_dims(), &mut rng);

    // Treating the loss as <gy, y> makes gy itself the output gradient, so
    // the numeric derivative of fprop is directly comparable.
    let gx_numeric = finite_diff_input_gradient(&x, &wgt, &gy, 1e-3)?;
    let gw_numeric = finite_diff_weight_gradient(&x, &wgt, &gy, 1e-3)?;

    let gx_direct = direct_pass(Pass::Bprop, &problem, &x, &wgt, &gy)?;
    let gw_direct = direct_pass(Pass::AccGrad, &problem, &x, &wgt, &gy)?;
    println!("direct vs finite differences:");
    println!("  input grad  {:.2e}", max_rel_error(&gx_direct, &gx_numeric));
    println!("  weight grad {:.2e}", max_rel_error(&gw_direct, &gw_numeric));

    let mut engine = ConvEngine::new();
    for path in FftPath::ALL {
        let plan = ConvPlan::minimal(problem, path)?;
        let gx = engine.bprop(&plan, &gy, &wgt)?;
        let gw = engine.accgrad(&plan, &x, &gy)?;
        println!("{} vs finite differences:", path.name());
        println!("  input grad  {:.2e}", max_rel_error(&gx, &gx_numeric));
        println!("  weight grad {:.2e}", max_rel_error(&gw, &gw_numeric));
    }

    // The same agreement holds with implicit padding; the gradient of a
    // padded pixel never leaves the padding, so clipped outputs still match.
    let padded = problem.with_padding(2, 1);
    let gy_p = random_tensor(padded.y_dims(), &mut rng);
    let plan = ConvPlan::minimal(padded, FftPath::Radix2Elided)?;
    let gx = engine.bprop(&plan, &gy_p, &wgt)?;
    let gx_ref = direct_pass(Pass::Bprop, &padded, &x, &wgt, &gy_p)?;
    println!(
        "padded (2,1) input grad, frequency vs direct: {:.2e}",
        max_rel_error(&gx, &gx_ref)
    );
    Ok(())
}
