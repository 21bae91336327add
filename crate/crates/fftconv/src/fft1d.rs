//! One-dimensional complex transforms.
//!
//! Three forward paths share the convention X_k = sum_j x_j w_n^{kj} with
//! w_n = exp(-2 pi i / n), unnormalized; every inverse divides by n.
//!
//! - [`fft_dit`]: iterative radix-2 decimation in time, natural order in and
//!   out. Requires a power-of-two length.
//! - [`fft_dif_noreorder`] / [`ifft_dit_from_bitreversed`]: the reorder-free
//!   pair. The DIF forward leaves its output in bit-reversed order and the
//!   DIT inverse consumes exactly that order, so a pipeline that only does
//!   pointwise work between the two never pays for a permutation pass.
//! - [`fft_smooth`]: recursive mixed-radix decimation in time for any
//!   7-smooth length, natural order in and out.
//!
//! [`dft_naive`] is the quadratic reference the fast paths are tested
//! against. It accumulates in f64 and is the most trusted code in the crate.

use num_complex::Complex32;

use crate::{Error, Result};

/// e^(-2 pi i j / n), evaluated in f64 and rounded once at the end.
///
/// Twiddle tables are filled per element from this function rather than by
/// repeated multiplication, which would drift for large n.
pub fn twiddle(n: usize, j: usize) -> Complex32 {
    let theta = -2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
    Complex32::new(theta.cos() as f32, theta.sin() as f32)
}

/// Quadratic reference DFT. Accumulates every bin in f64.
pub fn dft_naive(x: &[Complex32]) -> Vec<Complex32> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            let theta = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            re += v.re as f64 * c - v.im as f64 * s;
            im += v.re as f64 * s + v.im as f64 * c;
        }
        out.push(Complex32::new(re as f32, im as f32));
    }
    out
}

/// Reference inverse: conjugate-transform-conjugate, scaled by 1/n.
pub fn idft_naive(x: &[Complex32]) -> Vec<Complex32> {
    let n = x.len().max(1) as f32;
    let conj: Vec<Complex32> = x.iter().map(|v| v.conj()).collect();
    dft_naive(&conj)
        .iter()
        .map(|v| v.conj() / n)
        .collect()
}

/// True when n factors completely over {2, 3, 5, 7}. Zero is not smooth.
pub fn is_7smooth(n: usize) -> bool {
    if n == 0 {
        return false;
    }
    let mut m = n;
    for p in [2usize, 3, 5, 7] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}

/// In-place bit-reversal permutation. Length must be a power of two.
pub fn bit_reverse_permute<T>(x: &mut [T]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two() || n <= 1);
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            x.swap(i, j);
        }
    }
}

/// Precomputed state for the radix-2 paths: half a period of twiddles.
#[derive(Debug, Clone)]
pub struct Radix2Plan {
    n: usize,
    // twiddles[j] = w_n^j for j < n/2
    twiddles: Vec<Complex32>,
}

impl Radix2Plan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::UnsupportedSize { n });
        }
        let twiddles = (0..n / 2).map(|j| twiddle(n, j)).collect();
        Ok(Radix2Plan { n, twiddles })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Natural order in and out. Panics if x.len() != n.
    pub fn dit_inplace(&self, x: &mut [Complex32]) {
        assert_eq!(x.len(), self.n, "radix-2 plan length mismatch");
        bit_reverse_permute(x);
        self.butterflies_up(x, false);
    }

    /// Natural order in, bit-reversed order out. Panics if x.len() != n.
    pub fn dif_inplace(&self, x: &mut [Complex32]) {
        assert_eq!(x.len(), self.n, "radix-2 plan length mismatch");
        let n = self.n;
        let mut m = n;
        while m >= 2 {
            let half = m / 2;
            let step = n / m;
            for block in (0..n).step_by(m) {
                for j in 0..half {
                    let w = self.twiddles[j * step];
                    let a = x[block + j];
                    let b = x[block + j + half];
                    x[block + j] = a + b;
                    x[block + j + half] = (a - b) * w;
                }
            }
            m = half;
        }
    }

    /// Consumes bit-reversed input, produces natural order, scales by 1/n.
    /// Panics if x.len() != n.
    pub fn inverse_from_bitreversed_inplace(&self, x: &mut [Complex32]) {
        assert_eq!(x.len(), self.n, "radix-2 plan length mismatch");
        self.butterflies_up(x, true);
        let scale = 1.0 / self.n as f32;
        for v in x.iter_mut() {
            *v *= scale;
        }
    }

    // DIT stages, smallest to largest, expecting bit-reversed input layout.
    fn butterflies_up(&self, x: &mut [Complex32], conjugate: bool) {
        let n = self.n;
        let mut m = 2;
        while m <= n {
            let half = m / 2;
            let step = n / m;
            for block in (0..n).step_by(m) {
                for j in 0..half {
                    let mut w = self.twiddles[j * step];
                    if conjugate {
                        w = w.conj();
                    }
                    let a = x[block + j];
                    let b = x[block + j + half] * w;
                    x[block + j] = a + b;
                    x[block + j + half] = a - b;
                }
            }
            m *= 2;
        }
    }
}

/// Radix-2 decimation in time. Natural order in and out.
pub fn fft_dit(x: &[Complex32], plan: &Radix2Plan) -> Result<Vec<Complex32>> {
    check_len(x.len(), plan.n)?;
    let mut out = x.to_vec();
    plan.dit_inplace(&mut out);
    Ok(out)
}

/// Radix-2 decimation in frequency with the final permutation elided:
/// output bin j holds X_{bitrev(j)}.
pub fn fft_dif_noreorder(x: &[Complex32], plan: &Radix2Plan) -> Result<Vec<Complex32>> {
    check_len(x.len(), plan.n)?;
    let mut out = x.to_vec();
    plan.dif_inplace(&mut out);
    Ok(out)
}

/// Inverse transform that consumes bit-reversed input directly, so
/// `ifft_dit_from_bitreversed(fft_dif_noreorder(x))` recovers x without any
/// permutation pass in between.
pub fn ifft_dit_from_bitreversed(x: &[Complex32], plan: &Radix2Plan) -> Result<Vec<Complex32>> {
    check_len(x.len(), plan.n)?;
    let mut out = x.to_vec();
    plan.inverse_from_bitreversed_inplace(&mut out);
    Ok(out)
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::LenMismatch {
            context: "fft input",
            expected,
            got,
        });
    }
    Ok(())
}

// One decomposition level of the mixed-radix transform: n_stage = p * m.
#[derive(Debug, Clone)]
struct Stage {
    p: usize,
    m: usize,
    // tw[s * m + q] = w_{p m}^{s q}
    tw: Vec<Complex32>,
    // wp[j] = w_p^j
    wp: Vec<Complex32>,
}

/// Precomputed state for the mixed-radix path: one stage per prime factor,
/// factors taken smallest first.
#[derive(Debug, Clone)]
pub struct SmoothPlan {
    n: usize,
    stages: Vec<Stage>,
}

impl SmoothPlan {
    pub fn new(n: usize) -> Result<Self> {
        if !is_7smooth(n) {
            return Err(Error::UnsupportedSize { n });
        }
        let mut stages = Vec::new();
        let mut rem = n;
        for p in [2usize, 3, 5, 7] {
            while rem % p == 0 {
                let m = rem / p;
                let mut tw = Vec::with_capacity(p * m);
                for s in 0..p {
                    for q in 0..m {
                        tw.push(twiddle(rem, s * q));
                    }
                }
                let wp = (0..p).map(|j| twiddle(p, j)).collect();
                stages.push(Stage { p, m, tw, wp });
                rem = m;
            }
        }
        Ok(SmoothPlan { n, stages })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Natural order in and out. Panics if lengths differ from n.
    pub fn forward_into(&self, x: &[Complex32], out: &mut [Complex32]) {
        assert_eq!(x.len(), self.n, "smooth plan length mismatch");
        assert_eq!(out.len(), self.n, "smooth plan output length mismatch");
        let mut scratch = vec![Complex32::new(0.0, 0.0); self.n];
        self.rec(x, 0, 1, out, &mut scratch, 0);
    }

    /// Inverse with natural order in and out, scaled by 1/n.
    pub fn inverse_into(&self, x: &[Complex32], out: &mut [Complex32]) {
        // ifft(X) = conj(fft(conj(X))) / n
        let conj: Vec<Complex32> = x.iter().map(|v| v.conj()).collect();
        self.forward_into(&conj, out);
        let scale = 1.0 / self.n as f32;
        for v in out.iter_mut() {
            *v = v.conj() * scale;
        }
    }

    // Decimation in time over x[base], x[base+stride], ... with the stage at
    // `depth` splitting the current length into p interleaved subproblems.
    // `out` and `scratch` both have the current sublength; children use the
    // parent's out as their scratch, so no allocation happens past the root.
    fn rec(
        &self,
        x: &[Complex32],
        base: usize,
        stride: usize,
        out: &mut [Complex32],
        scratch: &mut [Complex32],
        depth: usize,
    ) {
        if depth == self.stages.len() {
            out[0] = x[base];
            return;
        }
        let stage = &self.stages[depth];
        let (p, m) = (stage.p, stage.m);
        for s in 0..p {
            self.rec(
                x,
                base + s * stride,
                stride * p,
                &mut scratch[s * m..(s + 1) * m],
                &mut out[s * m..(s + 1) * m],
                depth + 1,
            );
        }
        // Combine: X[q + r m] = sum_s Y_s[q] w_{pm}^{sq} w_p^{sr}.
        let mut t = [Complex32::new(0.0, 0.0); 7];
        for q in 0..m {
            t[0] = scratch[q];
            for s in 1..p {
                t[s] = scratch[s * m + q] * stage.tw[s * m + q];
            }
            if p == 2 {
                out[q] = t[0] + t[1];
                out[q + m] = t[0] - t[1];
            } else {
                for r in 0..p {
                    let mut acc = t[0];
                    for s in 1..p {
                        acc += t[s] * stage.wp[(s * r) % p];
                    }
                    out[q + r * m] = acc;
                }
            }
        }
    }
}

/// Mixed-radix forward transform for any 7-smooth length.
pub fn fft_smooth(x: &[Complex32], plan: &SmoothPlan) -> Result<Vec<Complex32>> {
    check_len(x.len(), plan.n)?;
    let mut out = vec![Complex32::new(0.0, 0.0); plan.n];
    plan.forward_into(x, &mut out);
    Ok(out)
}

/// Mixed-radix inverse transform, scaled by 1/n.
pub fn ifft_smooth(x: &[Complex32], plan: &SmoothPlan) -> Result<Vec<Complex32>> {
    check_len(x.len(), plan.n)?;
    let mut out = vec![Complex32::new(0.0, 0.0); plan.n];
    plan.inverse_into(x, &mut out);
    Ok(out)
}

/// Either radix-2 or mixed-radix, picked by length: powers of two take the
/// cheaper radix-2 path, everything else that is 7-smooth takes the mixed
/// path. Natural order on both sides.
#[derive(Debug, Clone)]
pub enum ComplexPlan {
    Radix2(Radix2Plan),
    Smooth(SmoothPlan),
}

impl ComplexPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n.is_power_of_two() {
            Ok(ComplexPlan::Radix2(Radix2Plan::new(n)?))
        } else {
            Ok(ComplexPlan::Smooth(SmoothPlan::new(n)?))
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ComplexPlan::Radix2(p) => p.len(),
            ComplexPlan::Smooth(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn forward_inplace(&self, x: &mut [Complex32]) {
        match self {
            ComplexPlan::Radix2(p) => p.dit_inplace(x),
            ComplexPlan::Smooth(p) => {
                let src = x.to_vec();
                p.forward_into(&src, x);
            }
        }
    }

    pub fn inverse_inplace(&self, x: &mut [Complex32]) {
        match self {
            ComplexPlan::Radix2(p) => {
                bit_reverse_permute(x);
                p.inverse_from_bitreversed_inplace(x);
            }
            ComplexPlan::Smooth(p) => {
                let src = x.to_vec();
                p.inverse_into(&src, x);
            }
        }
    }
}

/// A 1-d plan that can transform rows in place with natural order in and out.
pub trait Fft1d {
    fn len(&self) -> usize;
    fn forward_inplace(&self, x: &mut [Complex32]);
}

impl Fft1d for ComplexPlan {
    fn len(&self) -> usize {
        ComplexPlan::len(self)
    }

    fn forward_inplace(&self, x: &mut [Complex32]) {
        ComplexPlan::forward_inplace(self, x);
    }
}

impl Fft1d for Radix2Plan {
    fn len(&self) -> usize {
        self.n
    }

    fn forward_inplace(&self, x: &mut [Complex32]) {
        self.dit_inplace(x);
    }
}

impl Fft1d for SmoothPlan {
    fn len(&self) -> usize {
        self.n
    }

    fn forward_inplace(&self, x: &mut [Complex32]) {
        let src = x.to_vec();
        self.forward_into(&src, x);
    }
}

/// Transforms `rows` contiguous length-n vectors independently.
pub fn fft_batched<P: Fft1d>(xs: &[Complex32], plan: &P) -> Result<Vec<Complex32>> {
    let n = plan.len();
    if n == 0 || xs.len() % n != 0 {
        return Err(Error::LenMismatch {
            context: "fft_batched input",
            expected: n,
            got: xs.len(),
        });
    }
    let mut out = xs.to_vec();
    for row in out.chunks_mut(n) {
        plan.forward_inplace(row);
    }
    Ok(out)
}
