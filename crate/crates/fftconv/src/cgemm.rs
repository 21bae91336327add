//! Batched complex matrix products, one small dense product per frequency
//! bin. After the layout transpose, every bin of an operand tensor is a
//! contiguous matrix, so the whole reduction over feature planes becomes
//! `bins` independent products.
//!
//! Only the shapes the pipeline needs are supported, expressed as three
//! contraction patterns; anything more general belongs in a real BLAS.
//! All strategies run the same inner loops in the same order, so their
//! results agree bit for bit.

use num_complex::Complex32;

use crate::tensor::{FreqTensor, Layout};
use crate::{Error, Result};

/// How the two per-bin matrices contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatProduct {
    /// C[r][c] = sum_d A[r][d] * B~[c][d]; A is m-by-k, B is n-by-k.
    /// The forward pass: rows of A against rows of B.
    ABt,
    /// C[r][c] = sum_d A[r][d] * B~[d][c]; A is m-by-k, B is k-by-n.
    /// The input-gradient pass: a plain product.
    AB,
    /// C[r][c] = sum_d A~[d][r] * B[d][c]; A is k-by-m, B is k-by-n.
    /// The weight-gradient pass: columns of A against columns of B.
    AtB,
}

/// Shape and semantics of one batched product.
///
/// `conjugate_b` conjugates the operand marked `~` in the pattern equations:
/// B for [`MatProduct::ABt`] and [`MatProduct::AB`], A for
/// [`MatProduct::AtB`]. Conjugation is fused into the inner loop; no
/// conjugated copy is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CgemmBatch {
    pub bins: usize,
    pub m: usize,
    pub k_dim: usize,
    pub n: usize,
    pub product: MatProduct,
    pub conjugate_b: bool,
    pub accumulate: bool,
}

impl CgemmBatch {
    fn a_dims(&self) -> (usize, usize) {
        match self.product {
            MatProduct::ABt | MatProduct::AB => (self.m, self.k_dim),
            MatProduct::AtB => (self.k_dim, self.m),
        }
    }

    fn b_dims(&self) -> (usize, usize) {
        match self.product {
            MatProduct::ABt => (self.n, self.k_dim),
            MatProduct::AB | MatProduct::AtB => (self.k_dim, self.n),
        }
    }
}

/// Bin dispatch order. Every strategy computes each bin with [`cgemm_single`]
/// semantics; they differ only in how the bin loop is organized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GemmStrategy {
    /// One flat pass over all bins.
    Fused,
    /// One call per bin.
    PerBin,
    /// Bins walked in fixed-size blocks, a compromise for caches that do not
    /// hold the whole batch.
    TwoLevel,
}

impl GemmStrategy {
    pub const ALL: [GemmStrategy; 3] =
        [GemmStrategy::Fused, GemmStrategy::PerBin, GemmStrategy::TwoLevel];

    /// Stable name used in plan caches and reports.
    pub fn name(self) -> &'static str {
        match self {
            GemmStrategy::Fused => "fused",
            GemmStrategy::PerBin => "per_bin",
            GemmStrategy::TwoLevel => "two_level",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == s)
    }
}

const TWO_LEVEL_BLOCK: usize = 32;

/// One bin's product. `a`, `b`, `c` are the bin's matrices as described by
/// `spec`; `c` is m*n long.
pub fn cgemm_single(a: &[Complex32], b: &[Complex32], c: &mut [Complex32], spec: &CgemmBatch) {
    let (m, k, n) = (spec.m, spec.k_dim, spec.n);
    if !spec.accumulate {
        c.iter_mut().for_each(|v| *v = Complex32::new(0.0, 0.0));
    }
    let conj = spec.conjugate_b;
    match spec.product {
        MatProduct::ABt => {
            for r in 0..m {
                let arow = &a[r * k..(r + 1) * k];
                for col in 0..n {
                    let brow = &b[col * k..(col + 1) * k];
                    let mut acc = Complex32::new(0.0, 0.0);
                    for d in 0..k {
                        let bv = if conj { brow[d].conj() } else { brow[d] };
                        acc += arow[d] * bv;
                    }
                    c[r * n + col] += acc;
                }
            }
        }
        MatProduct::AB => {
            for r in 0..m {
                let arow = &a[r * k..(r + 1) * k];
                for col in 0..n {
                    let mut acc = Complex32::new(0.0, 0.0);
                    for d in 0..k {
                        let bv = if conj { b[d * n + col].conj() } else { b[d * n + col] };
                        acc += arow[d] * bv;
                    }
                    c[r * n + col] += acc;
                }
            }
        }
        MatProduct::AtB => {
            for r in 0..m {
                for col in 0..n {
                    let mut acc = Complex32::new(0.0, 0.0);
                    for d in 0..k {
                        let av = if conj { a[d * m + r].conj() } else { a[d * m + r] };
                        acc += av * b[d * n + col];
                    }
                    c[r * n + col] += acc;
                }
            }
        }
    }
}

/// Batched product over all bins of two Hwbd tensors.
pub fn cgemm_batched(
    a: &FreqTensor,
    b: &FreqTensor,
    spec: &CgemmBatch,
    strategy: GemmStrategy,
) -> Result<FreqTensor> {
    let mut out = FreqTensor::zeroed(
        [a.dims[0], a.dims[1], spec.m, spec.n],
        Layout::Hwbd,
        a.order,
    );
    cgemm_batched_into(a, b, &mut out, spec, strategy)?;
    Ok(out)
}

/// As [`cgemm_batched`], writing into `out` (which must already have the
/// right dims when accumulating; otherwise it is reshaped).
pub fn cgemm_batched_into(
    a: &FreqTensor,
    b: &FreqTensor,
    out: &mut FreqTensor,
    spec: &CgemmBatch,
    strategy: GemmStrategy,
) -> Result<()> {
    if a.layout != Layout::Hwbd || b.layout != Layout::Hwbd {
        return Err(Error::LayoutMismatch {
            context: "cgemm operands must be bin-major (Hwbd)",
        });
    }
    if a.order != b.order {
        return Err(Error::OrderMismatch {
            context: "cgemm operands",
        });
    }
    let bins = a.dims[0] * a.dims[1];
    if bins != spec.bins || b.dims[0] != a.dims[0] || b.dims[1] != a.dims[1] {
        return Err(Error::LenMismatch {
            context: "cgemm bin count",
            expected: spec.bins,
            got: bins,
        });
    }
    let (ar, ac) = spec.a_dims();
    if [a.dims[2], a.dims[3]] != [ar, ac] {
        return Err(Error::DimMismatch {
            context: "cgemm operand a",
            expected: [a.dims[0], a.dims[1], ar, ac],
            got: a.dims,
        });
    }
    let (br, bc) = spec.b_dims();
    if [b.dims[2], b.dims[3]] != [br, bc] {
        return Err(Error::DimMismatch {
            context: "cgemm operand b",
            expected: [b.dims[0], b.dims[1], br, bc],
            got: b.dims,
        });
    }
    let out_dims = [a.dims[0], a.dims[1], spec.m, spec.n];
    if spec.accumulate {
        if out.dims != out_dims || out.layout != Layout::Hwbd {
            return Err(Error::DimMismatch {
                context: "cgemm accumulate target",
                expected: out_dims,
                got: out.dims,
            });
        }
        out.order = a.order;
    } else {
        out.reshape(out_dims, Layout::Hwbd, a.order);
    }

    let a_len = ar * ac;
    let b_len = br * bc;
    let c_len = spec.m * spec.n;
    match strategy {
        // Pattern dispatch hoisted out of the bin loop; the loop body is the
        // same arithmetic as cgemm_single in the same order.
        GemmStrategy::Fused => {
            if !spec.accumulate {
                out.data.iter_mut().for_each(|v| *v = Complex32::new(0.0, 0.0));
            }
            let fused = CgemmBatch {
                accumulate: true,
                ..*spec
            };
            let (m, k, n) = (spec.m, spec.k_dim, spec.n);
            let conj = spec.conjugate_b;
            match spec.product {
                MatProduct::ABt => {
                    for t in 0..bins {
                        let at = &a.data[t * a_len..(t + 1) * a_len];
                        let bt = &b.data[t * b_len..(t + 1) * b_len];
                        let ct = &mut out.data[t * c_len..(t + 1) * c_len];
                        for r in 0..m {
                            let arow = &at[r * k..(r + 1) * k];
                            for col in 0..n {
                                let brow = &bt[col * k..(col + 1) * k];
                                let mut acc = Complex32::new(0.0, 0.0);
                                for d in 0..k {
                                    let bv = if conj { brow[d].conj() } else { brow[d] };
                                    acc += arow[d] * bv;
                                }
                                ct[r * n + col] += acc;
                            }
                        }
                    }
                }
                MatProduct::AB | MatProduct::AtB => {
                    for t in 0..bins {
                        cgemm_single(
                            &a.data[t * a_len..(t + 1) * a_len],
                            &b.data[t * b_len..(t + 1) * b_len],
                            &mut out.data[t * c_len..(t + 1) * c_len],
                            &fused,
                        );
                    }
                }
            }
        }
        GemmStrategy::PerBin => {
            for t in 0..bins {
                cgemm_single(
                    &a.data[t * a_len..(t + 1) * a_len],
                    &b.data[t * b_len..(t + 1) * b_len],
                    &mut out.data[t * c_len..(t + 1) * c_len],
                    spec,
                );
            }
        }
        GemmStrategy::TwoLevel => {
            for block in (0..bins).step_by(TWO_LEVEL_BLOCK) {
                let end = (block + TWO_LEVEL_BLOCK).min(bins);
                for t in block..end {
                    cgemm_single(
                        &a.data[t * a_len..(t + 1) * a_len],
                        &b.data[t * b_len..(t + 1) * b_len],
                        &mut out.data[t * c_len..(t + 1) * c_len],
                        spec,
                    );
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::FreqOrder;
    use rand::{Rng, SeedableRng};

    fn c(re: f32, im: f32) -> Complex32 {
        Complex32::new(re, im)
    }

    fn random_freq(dims: [usize; 4], seed: u64) -> FreqTensor {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let len: usize = dims.iter().product();
        FreqTensor {
            dims,
            layout: Layout::Hwbd,
            order: FreqOrder::Natural,
            data: (0..len)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        }
    }

    // Independent reference: index arithmetic written out per pattern.
    fn reference(a: &FreqTensor, b: &FreqTensor, spec: &CgemmBatch) -> Vec<Complex32> {
        let (m, k, n) = (spec.m, spec.k_dim, spec.n);
        let a_len: usize = a.dims[2] * a.dims[3];
        let b_len: usize = b.dims[2] * b.dims[3];
        let mut out = vec![c(0.0, 0.0); spec.bins * m * n];
        for t in 0..spec.bins {
            let at = &a.data[t * a_len..];
            let bt = &b.data[t * b_len..];
            for r in 0..m {
                for col in 0..n {
                    let mut acc = c(0.0, 0.0);
                    for d in 0..k {
                        let (av, bv) = match spec.product {
                            MatProduct::ABt => (at[r * k + d], maybe(bt[col * k + d], spec)),
                            MatProduct::AB => (at[r * k + d], maybe(bt[d * n + col], spec)),
                            MatProduct::AtB => (maybe(at[d * m + r], spec), bt[d * n + col]),
                        };
                        acc += av * bv;
                    }
                    out[(t * m + r) * n + col] = acc;
                }
            }
        }
        out
    }

    fn maybe(v: Complex32, spec: &CgemmBatch) -> Complex32 {
        if spec.conjugate_b {
            v.conj()
        } else {
            v
        }
    }

    fn max_diff(a: &[Complex32], b: &[Complex32]) -> f32 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f32, f32::max)
    }

    #[test]
    fn single_bin_scalar_conjugate() {
        let mut a = random_freq([1, 1, 1, 1], 0);
        let mut b = random_freq([1, 1, 1, 1], 0);
        a.data[0] = c(2.0, 1.0);
        b.data[0] = c(1.0, 1.0);
        let spec = CgemmBatch {
            bins: 1,
            m: 1,
            k_dim: 1,
            n: 1,
            product: MatProduct::ABt,
            conjugate_b: true,
            accumulate: false,
        };
        let out = cgemm_batched(&a, &b, &spec, GemmStrategy::Fused).unwrap();
        assert!((out.data[0] - c(3.0, -1.0)).norm() < 1e-6, "{:?}", out.data);
    }

    #[test]
    fn identity_b_returns_a() {
        let bins = 6;
        let m = 3;
        let a = random_freq([2, 3, m, m], 1);
        let mut b = FreqTensor::zeroed([2, 3, m, m], Layout::Hwbd, FreqOrder::Natural);
        for t in 0..bins {
            for d in 0..m {
                b.data[(t * m + d) * m + d] = c(1.0, 0.0);
            }
        }
        let spec = CgemmBatch {
            bins,
            m,
            k_dim: m,
            n: m,
            product: MatProduct::ABt,
            conjugate_b: true,
            accumulate: false,
        };
        let out = cgemm_batched(&a, &b, &spec, GemmStrategy::Fused).unwrap();
        assert!(max_diff(&out.data, &a.data) < 1e-6);
    }

    #[test]
    fn conjugation_is_a_no_op_for_real_b() {
        let a = random_freq([2, 2, 3, 4], 2);
        let mut b = random_freq([2, 2, 5, 4], 3);
        for v in b.data.iter_mut() {
            v.im = 0.0;
        }
        let spec = |conj: bool| CgemmBatch {
            bins: 4,
            m: 3,
            k_dim: 4,
            n: 5,
            product: MatProduct::ABt,
            conjugate_b: conj,
            accumulate: false,
        };
        let with = cgemm_batched(&a, &b, &spec(true), GemmStrategy::Fused).unwrap();
        let without = cgemm_batched(&a, &b, &spec(false), GemmStrategy::Fused).unwrap();
        assert_eq!(with.data, without.data);
    }

    #[test]
    fn all_patterns_match_reference() {
        for (product, a_dims, b_dims) in [
            (MatProduct::ABt, [3, 4, 2, 5], [3, 4, 6, 5]),
            (MatProduct::AB, [3, 4, 2, 5], [3, 4, 5, 6]),
            (MatProduct::AtB, [3, 4, 5, 2], [3, 4, 5, 6]),
        ] {
            let spec = CgemmBatch {
                bins: 12,
                m: 2,
                k_dim: 5,
                n: 6,
                product,
                conjugate_b: true,
                accumulate: false,
            };
            let a = random_freq(a_dims, 10);
            let b = random_freq(b_dims, 11);
            let out = cgemm_batched(&a, &b, &spec, GemmStrategy::Fused).unwrap();
            let want = reference(&a, &b, &spec);
            assert!(max_diff(&out.data, &want) < 1e-5, "{product:?}");
        }
    }

    #[test]
    fn strategies_agree_bit_for_bit() {
        let spec = CgemmBatch {
            bins: 77,
            m: 3,
            k_dim: 4,
            n: 2,
            product: MatProduct::ABt,
            conjugate_b: true,
            accumulate: false,
        };
        let a = random_freq([7, 11, 3, 4], 20);
        let b = random_freq([7, 11, 2, 4], 21);
        let fused = cgemm_batched(&a, &b, &spec, GemmStrategy::Fused).unwrap();
        let per_bin = cgemm_batched(&a, &b, &spec, GemmStrategy::PerBin).unwrap();
        let two_level = cgemm_batched(&a, &b, &spec, GemmStrategy::TwoLevel).unwrap();
        assert_eq!(fused.data, per_bin.data);
        assert_eq!(fused.data, two_level.data);
    }

    #[test]
    fn accumulate_adds_to_existing() {
        let spec_base = CgemmBatch {
            bins: 4,
            m: 2,
            k_dim: 3,
            n: 2,
            product: MatProduct::ABt,
            conjugate_b: false,
            accumulate: false,
        };
        let a = random_freq([2, 2, 2, 3], 30);
        let b = random_freq([2, 2, 2, 3], 31);
        let once = cgemm_batched(&a, &b, &spec_base, GemmStrategy::Fused).unwrap();
        let mut twice = once.clone();
        let spec_acc = CgemmBatch {
            accumulate: true,
            ..spec_base
        };
        cgemm_batched_into(&a, &b, &mut twice, &spec_acc, GemmStrategy::Fused).unwrap();
        for (d, s) in twice.data.iter().zip(&once.data) {
            assert!((d - s - s).norm() < 1e-5);
        }
    }

    #[test]
    fn rejects_wrong_layout_and_order() {
        let mut a = random_freq([2, 2, 1, 1], 40);
        let b = random_freq([2, 2, 1, 1], 41);
        let spec = CgemmBatch {
            bins: 4,
            m: 1,
            k_dim: 1,
            n: 1,
            product: MatProduct::ABt,
            conjugate_b: false,
            accumulate: false,
        };
        a.layout = Layout::Bdhw;
        assert!(matches!(
            cgemm_batched(&a, &b, &spec, GemmStrategy::Fused),
            Err(Error::LayoutMismatch { .. })
        ));
        a.layout = Layout::Hwbd;
        a.order = FreqOrder::BitReversedDif;
        assert!(matches!(
            cgemm_batched(&a, &b, &spec, GemmStrategy::Fused),
            Err(Error::OrderMismatch { .. })
        ));
    }

    #[test]
    fn rejects_wrong_shapes() {
        let a = random_freq([2, 2, 3, 4], 50);
        let b = random_freq([2, 2, 3, 4], 51);
        let spec = CgemmBatch {
            bins: 4,
            m: 3,
            k_dim: 4,
            n: 5,
            product: MatProduct::ABt,
            conjugate_b: false,
            accumulate: false,
        };
        assert!(matches!(
            cgemm_batched(&a, &b, &spec, GemmStrategy::Fused),
            Err(Error::DimMismatch { .. })
        ));
    }
}
