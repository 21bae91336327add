//! Loop-nest reference implementations of the three training passes.
//!
//! Everything here is written for clarity and determinism, not speed: fixed
//! loop order, f64 accumulation, one output element finished before the next
//! begins. The frequency-domain engine is tested against these functions, so
//! they stay as close to the defining sums as possible.
//!
//! Shapes follow the batch-major convention throughout:
//! input [s][f][h][w], weights [f'][f][k_h][k_w], output [s][f'][y_h][y_w].

use crate::tensor::{zero_pad, PadSpec, RealTensor4};
use crate::{Error, Result};

/// One convolution problem: batch s, input planes f, output planes fp,
/// input extent h by w, kernel extent k_h by k_w, and implicit zero padding
/// p_h by p_w appended at the bottom/right of every input plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvProblem {
    pub s: usize,
    pub f: usize,
    pub fp: usize,
    pub h: usize,
    pub w: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub p_h: usize,
    pub p_w: usize,
}

impl ConvProblem {
    pub fn new(s: usize, f: usize, fp: usize, h: usize, w: usize, k_h: usize, k_w: usize) -> Self {
        ConvProblem {
            s,
            f,
            fp,
            h,
            w,
            k_h,
            k_w,
            p_h: 0,
            p_w: 0,
        }
    }

    /// Adds the customary boundary padding of half a kernel per axis.
    pub fn with_default_padding(mut self) -> Self {
        self.p_h = self.k_h / 2;
        self.p_w = self.k_w / 2;
        self
    }

    pub fn with_padding(mut self, p_h: usize, p_w: usize) -> Self {
        self.p_h = p_h;
        self.p_w = p_w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.s, self.f, self.fp, self.h, self.w, self.k_h, self.k_w];
        if positive.contains(&0) {
            return Err(Error::LenMismatch {
                context: "conv problem dimension must be nonzero",
                expected: 1,
                got: 0,
            });
        }
        if self.k_h > self.padded_h() || self.k_w > self.padded_w() {
            return Err(Error::TransformTooSmall {
                n: self.padded_h().min(self.padded_w()),
                need: self.k_h.max(self.k_w),
            });
        }
        Ok(())
    }

    pub fn padded_h(&self) -> usize {
        self.h + self.p_h
    }

    pub fn padded_w(&self) -> usize {
        self.w + self.p_w
    }

    /// Output extent of the forward pass.
    pub fn out_h(&self) -> usize {
        self.padded_h() - self.k_h + 1
    }

    pub fn out_w(&self) -> usize {
        self.padded_w() - self.k_w + 1
    }

    pub fn x_dims(&self) -> [usize; 4] {
        [self.s, self.f, self.h, self.w]
    }

    pub fn w_dims(&self) -> [usize; 4] {
        [self.fp, self.f, self.k_h, self.k_w]
    }

    pub fn y_dims(&self) -> [usize; 4] {
        [self.s, self.fp, self.out_h(), self.out_w()]
    }
}

/// Multiply-add count of the direct forward pass, which doubles as the
/// problem-size normalizer for throughput reporting. The spatial factors
/// saturate at zero when the kernel only fits thanks to padding.
pub fn flop_count(p: &ConvProblem) -> u64 {
    let oy = (p.h + 1).saturating_sub(p.k_h) as u64;
    let ox = (p.w + 1).saturating_sub(p.k_w) as u64;
    p.s as u64 * p.f as u64 * p.fp as u64 * p.k_h as u64 * p.k_w as u64 * oy * ox
}

fn check_dims(context: &'static str, t: &RealTensor4, want: [usize; 4]) -> Result<()> {
    if t.dims != want {
        return Err(Error::DimMismatch {
            context,
            expected: want,
            got: t.dims,
        });
    }
    Ok(())
}

/// Forward pass: out[s][j] = sum_i x[s][i] correlated with wgt[j][i], valid
/// region only. Kernel extents must not exceed the input extents.
pub fn fprop_direct(x: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
    let [s, f, h, w] = x.dims;
    let [fp, fw, k_h, k_w] = wgt.dims;
    if fw != f {
        return Err(Error::DimMismatch {
            context: "fprop weight planes",
            expected: [fp, f, k_h, k_w],
            got: wgt.dims,
        });
    }
    if k_h > h || k_w > w || k_h == 0 || k_w == 0 {
        return Err(Error::TransformTooSmall {
            n: h.min(w),
            need: k_h.max(k_w),
        });
    }
    let (oy, ox) = (h - k_h + 1, w - k_w + 1);
    let mut out = RealTensor4::zeroed([s, fp, oy, ox]);
    let mut acc = vec![0.0f64; oy * ox];
    for is in 0..s {
        for j in 0..fp {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..f {
                let xp = x.plane(is, i);
                let wp = wgt.plane(j, i);
                for y in 0..oy {
                    for xo in 0..ox {
                        let mut dot = 0.0f64;
                        for u in 0..k_h {
                            let xrow = &xp[(y + u) * w + xo..(y + u) * w + xo + k_w];
                            let wrow = &wp[u * k_w..(u + 1) * k_w];
                            for v in 0..k_w {
                                dot += xrow[v] as f64 * wrow[v] as f64;
                            }
                        }
                        acc[y * ox + xo] += dot;
                    }
                }
            }
            let dst = out.plane_mut(is, j);
            for (d, a) in dst.iter_mut().zip(&acc) {
                *d = *a as f32;
            }
        }
    }
    Ok(out)
}

/// Input gradient: the full convolution of gy with wgt, reducing over output
/// planes. Written as a correlation against gy embedded in a zero field with
/// the kernel flipped in both axes, which is the same sum with the bounds
/// made explicit.
pub fn bprop_direct(gy: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
    let [s, fp, oy, ox] = gy.dims;
    let [fpw, f, k_h, k_w] = wgt.dims;
    if fpw != fp {
        return Err(Error::DimMismatch {
            context: "bprop weight planes",
            expected: [fp, f, k_h, k_w],
            got: wgt.dims,
        });
    }
    // gy sits at offset (k_h-1, k_w-1) inside a field sized for full overlap.
    let field = embed(gy, k_h - 1, k_w - 1, oy + 2 * (k_h - 1), ox + 2 * (k_w - 1));
    let mut flipped = RealTensor4::zeroed([f, fp, k_h, k_w]);
    for j in 0..fp {
        for i in 0..f {
            for u in 0..k_h {
                for v in 0..k_w {
                    flipped.set(i, j, u, v, wgt.at(j, i, k_h - 1 - u, k_w - 1 - v));
                }
            }
        }
    }
    debug_assert_eq!(field.dims[0], s);
    fprop_direct(&field, &flipped)
}

/// Weight gradient: gw[j][i] = sum_s gy[s][j] correlated with x[s][i].
/// Kernel extent is implied by the two spatial extents.
pub fn accgrad_direct(x: &RealTensor4, gy: &RealTensor4) -> Result<RealTensor4> {
    let [s, f, h, w] = x.dims;
    let [sg, fp, oy, ox] = gy.dims;
    if sg != s {
        return Err(Error::DimMismatch {
            context: "accgrad batch",
            expected: [s, fp, oy, ox],
            got: gy.dims,
        });
    }
    if oy > h || ox > w {
        return Err(Error::TransformTooSmall {
            n: h.min(w),
            need: oy.max(ox),
        });
    }
    let (k_h, k_w) = (h - oy + 1, w - ox + 1);
    let mut out = RealTensor4::zeroed([fp, f, k_h, k_w]);
    let mut acc = vec![0.0f64; k_h * k_w];
    for j in 0..fp {
        for i in 0..f {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for is in 0..s {
                let xp = x.plane(is, i);
                let gp = gy.plane(is, j);
                for u in 0..k_h {
                    for v in 0..k_w {
                        let mut dot = 0.0f64;
                        for y in 0..oy {
                            let xrow = &xp[(y + u) * w + v..(y + u) * w + v + ox];
                            let grow = &gp[y * ox..(y + 1) * ox];
                            for t in 0..ox {
                                dot += xrow[t] as f64 * grow[t] as f64;
                            }
                        }
                        acc[u * k_w + v] += dot;
                    }
                }
            }
            let dst = out.plane_mut(j, i);
            for (d, a) in dst.iter_mut().zip(&acc) {
                *d = *a as f32;
            }
        }
    }
    Ok(out)
}

// Copies t into a zeroed (big_h, big_w) field at offset (top, left).
pub(crate) fn embed(
    t: &RealTensor4,
    top: usize,
    left: usize,
    big_h: usize,
    big_w: usize,
) -> RealTensor4 {
    let [a, b, h, w] = t.dims;
    let mut out = RealTensor4::zeroed([a, b, big_h, big_w]);
    for ia in 0..a {
        for ib in 0..b {
            let src = t.plane(ia, ib);
            let dst = out.plane_mut(ia, ib);
            for i in 0..h {
                dst[(i + top) * big_w + left..(i + top) * big_w + left + w]
                    .copy_from_slice(&src[i * w..(i + 1) * w]);
            }
        }
    }
    out
}

/// Forward pass with the problem's boundary padding applied first.
pub fn fprop_problem(p: &ConvProblem, x: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
    p.validate()?;
    check_dims("fprop input", x, p.x_dims())?;
    check_dims("fprop weights", wgt, p.w_dims())?;
    if p.p_h == 0 && p.p_w == 0 {
        return fprop_direct(x, wgt);
    }
    let padded = zero_pad(
        x,
        PadSpec {
            n_h: p.padded_h(),
            n_w: p.padded_w(),
        },
    )?;
    fprop_direct(&padded, wgt)
}

/// Input gradient for the problem: full convolution, clipped back to the
/// unpadded input extent (padding cells receive no gradient).
pub fn bprop_problem(p: &ConvProblem, gy: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
    p.validate()?;
    check_dims("bprop output gradient", gy, p.y_dims())?;
    check_dims("bprop weights", wgt, p.w_dims())?;
    let full = bprop_direct(gy, wgt)?;
    crate::tensor::clip(&full, p.h, p.w)
}

/// Weight gradient for the problem, padding applied to the input first.
pub fn accgrad_problem(p: &ConvProblem, x: &RealTensor4, gy: &RealTensor4) -> Result<RealTensor4> {
    p.validate()?;
    check_dims("accgrad input", x, p.x_dims())?;
    check_dims("accgrad output gradient", gy, p.y_dims())?;
    if p.p_h == 0 && p.p_w == 0 {
        return accgrad_direct(x, gy);
    }
    let padded = zero_pad(
        x,
        PadSpec {
            n_h: p.padded_h(),
            n_w: p.padded_w(),
        },
    )?;
    accgrad_direct(&padded, gy)
}

/// Numeric input gradient of L = sum(fprop(x, wgt) * gy) by central
/// differences. Quadratic cost in the input size; test problems only.
pub fn finite_diff_input_gradient(
    x: &RealTensor4,
    wgt: &RealTensor4,
    gy: &RealTensor4,
    epsilon: f32,
) -> Result<RealTensor4> {
    let mut probe = x.clone();
    let mut grad = RealTensor4::zeroed(x.dims);
    for idx in 0..x.data.len() {
        let saved = probe.data[idx];
        probe.data[idx] = saved + epsilon;
        let plus = loss(&fprop_direct(&probe, wgt)?, gy);
        probe.data[idx] = saved - epsilon;
        let minus = loss(&fprop_direct(&probe, wgt)?, gy);
        probe.data[idx] = saved;
        grad.data[idx] = ((plus - minus) / (2.0 * epsilon as f64)) as f32;
    }
    Ok(grad)
}

/// Numeric weight gradient of the same loss.
pub fn finite_diff_weight_gradient(
    x: &RealTensor4,
    wgt: &RealTensor4,
    gy: &RealTensor4,
    epsilon: f32,
) -> Result<RealTensor4> {
    let mut probe = wgt.clone();
    let mut grad = RealTensor4::zeroed(wgt.dims);
    for idx in 0..wgt.data.len() {
        let saved = probe.data[idx];
        probe.data[idx] = saved + epsilon;
        let plus = loss(&fprop_direct(x, &probe)?, gy);
        probe.data[idx] = saved - epsilon;
        let minus = loss(&fprop_direct(x, &probe)?, gy);
        probe.data[idx] = saved;
        grad.data[idx] = ((plus - minus) / (2.0 * epsilon as f64)) as f32;
    }
    Ok(grad)
}

fn loss(y: &RealTensor4, gy: &RealTensor4) -> f64 {
    y.data
        .iter()
        .zip(&gy.data)
        .map(|(a, b)| *a as f64 * *b as f64)
        .sum()
}

/// Largest absolute difference between two tensors, scaled by the largest
/// magnitude in the reference. Zero reference compares absolutely.
pub fn max_rel_error(got: &RealTensor4, want: &RealTensor4) -> f32 {
    let scale = want
        .data
        .iter()
        .map(|v| v.abs())
        .fold(0.0f32, f32::max)
        .max(1e-20);
    got.data
        .iter()
        .zip(&want.data)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    use crate::tensor::random_tensor;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fprop_box_kernel_hand_case() {
        let x = RealTensor4::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let wgt = RealTensor4::from_vec([1, 1, 2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let y = fprop_direct(&x, &wgt).unwrap();
        assert_eq!(y.dims, [1, 1, 1, 1]);
        assert_eq!(y.data, vec![10.0]);
    }

    #[test]
    fn fprop_unit_kernel_is_identity() {
        let mut r = rng(1);
        let x = random_tensor([2, 1, 3, 4], &mut r);
        let wgt = RealTensor4::from_vec([1, 1, 1, 1], vec![1.0]).unwrap();
        let y = fprop_direct(&x, &wgt).unwrap();
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn fprop_reduces_over_input_planes() {
        let x = RealTensor4::from_vec([1, 2, 1, 1], vec![3.0, 5.0]).unwrap();
        let wgt = RealTensor4::from_vec([1, 2, 1, 1], vec![10.0, 100.0]).unwrap();
        let y = fprop_direct(&x, &wgt).unwrap();
        assert_eq!(y.data, vec![530.0]);
    }

    #[test]
    fn fprop_impulse_stamps_kernel() {
        let mut x = RealTensor4::zeroed([1, 1, 5, 5]);
        x.set(0, 0, 2, 2, 1.0);
        let wgt =
            RealTensor4::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = fprop_direct(&x, &wgt).unwrap();
        // Correlation: out[a] = sum_u x[a+u] w[u], so the stamp lands
        // reversed, upper-left of the impulse.
        assert_eq!(y.at(0, 0, 2, 2), 1.0);
        assert_eq!(y.at(0, 0, 2, 1), 2.0);
        assert_eq!(y.at(0, 0, 1, 2), 3.0);
        assert_eq!(y.at(0, 0, 1, 1), 4.0);
    }

    #[test]
    fn fprop_rejects_oversized_kernel() {
        let x = RealTensor4::zeroed([1, 1, 2, 2]);
        let wgt = RealTensor4::zeroed([1, 1, 3, 3]);
        assert!(fprop_direct(&x, &wgt).is_err());
    }

    #[test]
    fn bprop_matches_finite_differences() {
        let mut r = rng(2);
        let p = ConvProblem::new(2, 2, 3, 5, 4, 3, 2);
        let x = random_tensor(p.x_dims(), &mut r);
        let wgt = random_tensor(p.w_dims(), &mut r);
        let gy = random_tensor(p.y_dims(), &mut r);
        let analytic = bprop_direct(&gy, &wgt).unwrap();
        assert_eq!(analytic.dims, p.x_dims());
        let numeric = finite_diff_input_gradient(&x, &wgt, &gy, 1e-3).unwrap();
        assert!(
            max_rel_error(&analytic, &numeric) < 1e-2,
            "rel err {}",
            max_rel_error(&analytic, &numeric)
        );
    }

    #[test]
    fn accgrad_matches_finite_differences() {
        let mut r = rng(3);
        let p = ConvProblem::new(3, 2, 2, 4, 5, 2, 3);
        let x = random_tensor(p.x_dims(), &mut r);
        let wgt = random_tensor(p.w_dims(), &mut r);
        let gy = random_tensor(p.y_dims(), &mut r);
        let analytic = accgrad_direct(&x, &gy).unwrap();
        assert_eq!(analytic.dims, p.w_dims());
        let numeric = finite_diff_weight_gradient(&x, &wgt, &gy, 1e-3).unwrap();
        assert!(
            max_rel_error(&analytic, &numeric) < 1e-2,
            "rel err {}",
            max_rel_error(&analytic, &numeric)
        );
    }

    #[test]
    fn accgrad_hand_case() {
        // x = [1 2 3], gy = [1 1]: gw[0] = 1+2, gw[1] = 2+3.
        let x = RealTensor4::from_vec([1, 1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let gy = RealTensor4::from_vec([1, 1, 1, 2], vec![1.0, 1.0]).unwrap();
        let gw = accgrad_direct(&x, &gy).unwrap();
        assert_eq!(gw.dims, [1, 1, 1, 2]);
        assert_eq!(gw.data, vec![3.0, 5.0]);
    }

    #[test]
    fn padded_problem_gradients_check_out() {
        let mut r = rng(4);
        let p = ConvProblem::new(2, 2, 2, 4, 4, 3, 3).with_default_padding();
        assert_eq!((p.p_h, p.p_w), (1, 1));
        let x = random_tensor(p.x_dims(), &mut r);
        let wgt = random_tensor(p.w_dims(), &mut r);
        let gy = random_tensor(p.y_dims(), &mut r);

        let padded = zero_pad(
            &x,
            PadSpec {
                n_h: p.padded_h(),
                n_w: p.padded_w(),
            },
        )
        .unwrap();

        let gx = bprop_problem(&p, &gy, &wgt).unwrap();
        let numeric_full = finite_diff_input_gradient(&padded, &wgt, &gy, 1e-3).unwrap();
        let numeric = crate::tensor::clip(&numeric_full, p.h, p.w).unwrap();
        assert!(max_rel_error(&gx, &numeric) < 1e-2);

        let gw = accgrad_problem(&p, &x, &gy).unwrap();
        let numeric_w = finite_diff_weight_gradient(&padded, &wgt, &gy, 1e-3).unwrap();
        assert!(max_rel_error(&gw, &numeric_w) < 1e-2);
    }

    #[test]
    fn flop_count_toy_case() {
        let p = ConvProblem::new(1, 1, 1, 3, 3, 2, 2);
        assert_eq!(flop_count(&p), 16);
    }

    #[test]
    fn flop_count_layer_shape() {
        let p = ConvProblem::new(128, 64, 64, 64, 64, 9, 9);
        assert_eq!(flop_count(&p), 128 * 64 * 64 * 81 * 56 * 56);
    }

    #[test]
    fn problem_validation() {
        assert!(ConvProblem::new(1, 1, 1, 3, 3, 4, 4).validate().is_err());
        assert!(ConvProblem::new(1, 1, 1, 3, 3, 4, 4)
            .with_padding(1, 1)
            .validate()
            .is_ok());
        assert!(ConvProblem::new(0, 1, 1, 3, 3, 1, 1).validate().is_err());
    }
}
