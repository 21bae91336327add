//! The frequency-domain convolution engine.
//!
//! Every pass follows the same pipeline: zero-extend each plane to the
//! transform extent (implicitly, through clipped loads), take the batched
//! real 2-d FFT of both operands, transpose to bin-major layout, contract
//! the per-bin matrices over the reduction axis, transpose back, invert,
//! and clip to the pass's output window:
//!
//! - forward:        out[s][j] = sum_i  x[s][i]  corr wgt[j][i]
//! - input gradient: gx[s][i]  = sum_j  gy[s][j] conv wgt[j][i]
//! - weight gradient: gw[j][i] = sum_s  gy[s][j] corr x[s][i]
//!
//! Correlation conjugates one spectrum (the kernel for the forward pass, the
//! output gradient for the weight pass); convolution conjugates nothing.
//!
//! Two transform paths exist. `Radix2Elided` uses power-of-two extents and
//! keeps both operand spectra in bit-reversed row-bin order all the way
//! through the contraction; the pointwise pairing is unaffected because both
//! operands carry the same permutation, and the inverse consumes that order
//! directly, so no reorder pass ever runs. `SmoothNatural` accepts any
//! 7-smooth extents in natural order, which buys much tighter interpolation
//! sizes at a small per-butterfly cost.

use std::collections::HashMap;
use std::rc::Rc;

use crate::cgemm::{cgemm_batched_into, CgemmBatch, GemmStrategy, MatProduct};
use crate::direct_conv::{embed, ConvProblem};
use crate::fft1d::is_7smooth;
use crate::rfft::{half_bins, irfft2d_batched, rfft2d_batched_into, FreqLayout, RfftPlan};
use crate::tensor::{
    transpose_bdhw_hwbd_into, transpose_hwbd_bdhw_into, FreqOrder, FreqTensor, Layout,
    RealTensor4,
};
use crate::{Error, Result};

/// Which transform family a plan drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FftPath {
    /// Power-of-two extents, reorder-free DIF forward / DIT inverse pair.
    Radix2Elided,
    /// Any 7-smooth extents, natural bin order.
    SmoothNatural,
}

impl FftPath {
    pub const ALL: [FftPath; 2] = [FftPath::Radix2Elided, FftPath::SmoothNatural];

    /// Stable name used in plan caches and reports.
    pub fn name(self) -> &'static str {
        match self {
            FftPath::Radix2Elided => "radix2",
            FftPath::SmoothNatural => "smooth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// The three training passes a layer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pass {
    Fprop,
    Bprop,
    AccGrad,
}

impl Pass {
    pub const ALL: [Pass; 3] = [Pass::Fprop, Pass::Bprop, Pass::AccGrad];

    pub fn name(self) -> &'static str {
        match self {
            Pass::Fprop => "fprop",
            Pass::Bprop => "bprop",
            Pass::AccGrad => "accgrad",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Output-space tile extents for the tiled dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TilePair {
    pub d_h: usize,
    pub d_w: usize,
}

/// A validated recipe: problem, transform extents, path, contraction
/// strategy, and optional tiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvPlan {
    pub problem: ConvProblem,
    pub n_h: usize,
    pub n_w: usize,
    pub fft_path: FftPath,
    pub gemm: GemmStrategy,
    pub tiling: Option<TilePair>,
}

impl ConvPlan {
    pub fn new(problem: ConvProblem, fft_path: FftPath, n_h: usize, n_w: usize) -> Result<Self> {
        let plan = ConvPlan {
            problem,
            n_h,
            n_w,
            fft_path,
            gemm: GemmStrategy::Fused,
            tiling: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn tiled(
        problem: ConvProblem,
        fft_path: FftPath,
        n_h: usize,
        n_w: usize,
        tile: TilePair,
    ) -> Result<Self> {
        let plan = ConvPlan {
            problem,
            n_h,
            n_w,
            fft_path,
            gemm: GemmStrategy::Fused,
            tiling: Some(tile),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Smallest untiled transform extents the path admits for this problem.
    pub fn minimal(problem: ConvProblem, fft_path: FftPath) -> Result<Self> {
        let (need_h, need_w) = (problem.padded_h(), problem.padded_w());
        let (n_h, n_w) = match fft_path {
            FftPath::Radix2Elided => (need_h.next_power_of_two(), need_w.next_power_of_two()),
            FftPath::SmoothNatural => (next_7smooth(need_h), next_7smooth(need_w)),
        };
        ConvPlan::new(problem, fft_path, n_h, n_w)
    }

    pub fn with_gemm(mut self, gemm: GemmStrategy) -> Self {
        self.gemm = gemm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        for n in [self.n_h, self.n_w] {
            let ok = match self.fft_path {
                FftPath::Radix2Elided => n.is_power_of_two(),
                FftPath::SmoothNatural => is_7smooth(n),
            };
            if !ok {
                return Err(Error::UnsupportedSize { n });
            }
        }
        let p = &self.problem;
        let (need_h, need_w) = match self.tiling {
            None => (p.padded_h(), p.padded_w()),
            Some(t) => {
                if t.d_h == 0 || t.d_h > p.out_h() {
                    return Err(Error::TileOutOfRange {
                        d: t.d_h,
                        limit: p.out_h(),
                    });
                }
                if t.d_w == 0 || t.d_w > p.out_w() {
                    return Err(Error::TileOutOfRange {
                        d: t.d_w,
                        limit: p.out_w(),
                    });
                }
                (t.d_h + p.k_h - 1, t.d_w + p.k_w - 1)
            }
        };
        if self.n_h < need_h {
            return Err(Error::TransformTooSmall {
                n: self.n_h,
                need: need_h,
            });
        }
        if self.n_w < need_w {
            return Err(Error::TransformTooSmall {
                n: self.n_w,
                need: need_w,
            });
        }
        Ok(())
    }

    /// Accuracy budget for comparisons against the direct reference: a 1e-3
    /// relative base, widened once transforms grow past 2^10 points.
    pub fn tolerance(&self) -> f32 {
        let points = (self.n_h * self.n_w) as f32;
        1e-3 * (points.log2() / 10.0).max(1.0)
    }

    /// Complex workspace footprint of one pass, in bytes: spectrum and
    /// transposed copies of both operands and the result.
    pub fn buffer_bytes(&self) -> usize {
        let p = &self.problem;
        let planes = p.s * p.f + p.f * p.fp + p.s * p.fp;
        2 * planes * self.n_h * half_bins(self.n_w) * std::mem::size_of::<num_complex::Complex32>()
    }
}

/// Smallest 7-smooth integer at or above n.
pub fn next_7smooth(n: usize) -> usize {
    let mut m = n.max(1);
    while !is_7smooth(m) {
        m += 1;
    }
    m
}

/// Cost model for plan comparison, returned as (transform path, direct)
/// multiply-add estimates. The transform model charges the contraction at
/// every padded point plus the three batched transforms; the direct model
/// charges the kernel at every padded point.
pub fn theoretical_flops(plan: &ConvPlan) -> (f64, f64) {
    let p = &plan.problem;
    let (s, f, fp) = (p.s as f64, p.f as f64, p.fp as f64);
    let n2 = (plan.n_h * plan.n_w) as f64;
    let log_n = n2.log2() / 2.0;
    let fft = s * f * fp * n2 + (s * f + f * fp + s * fp) * n2 * log_n;
    let direct = s * f * fp * n2 * (p.k_h * p.k_w) as f64;
    (fft, direct)
}

// The six reusable frequency-domain scratch tensors. They only ever grow;
// a second pass with the same plan allocates nothing.
#[derive(Debug, Default)]
struct WorkBuffers {
    a_f: Option<FreqTensor>,
    b_f: Option<FreqTensor>,
    a_ft: Option<FreqTensor>,
    b_ft: Option<FreqTensor>,
    out_ft: Option<FreqTensor>,
    out_f: Option<FreqTensor>,
}

fn take(slot: &mut Option<FreqTensor>) -> FreqTensor {
    slot.take()
        .unwrap_or_else(|| FreqTensor::zeroed([0, 0, 0, 0], Layout::Bdhw, FreqOrder::Natural))
}

/// Reusable engine: holds work buffers and a small cache of transform plans
/// keyed by extent, so repeated passes with the same plan do no planning or
/// allocation work.
#[derive(Debug, Default)]
pub struct ConvEngine {
    buffers: WorkBuffers,
    rfft_plans: HashMap<(usize, usize, bool), Rc<RfftPlan>>,
}

impl ConvEngine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total complex elements currently held across the work buffers. Grows
    /// monotonically over the engine's life.
    pub fn buffer_capacity(&self) -> usize {
        [
            &self.buffers.a_f,
            &self.buffers.b_f,
            &self.buffers.a_ft,
            &self.buffers.b_ft,
            &self.buffers.out_ft,
            &self.buffers.out_f,
        ]
        .iter()
        .map(|t| t.as_ref().map_or(0, |t| t.data.capacity()))
        .sum()
    }

    fn rfft_plan(&mut self, plan: &ConvPlan) -> Result<Rc<RfftPlan>> {
        let bitrev = matches!(plan.fft_path, FftPath::Radix2Elided);
        let key = (plan.n_h, plan.n_w, bitrev);
        if let Some(p) = self.rfft_plans.get(&key) {
            return Ok(Rc::clone(p));
        }
        let order = if bitrev {
            FreqOrder::BitReversedDif
        } else {
            FreqOrder::Natural
        };
        let p = Rc::new(RfftPlan::with_order(
            plan.n_h,
            plan.n_w,
            FreqLayout::RowMajorFreq,
            order,
        )?);
        self.rfft_plans.insert(key, Rc::clone(&p));
        Ok(p)
    }

    // Transform both operands and leave their bin-major spectra in
    // buffers.a_ft / b_ft.
    fn spectra(&mut self, plan: &ConvPlan, a: &RealTensor4, b: &RealTensor4) -> Result<()> {
        let rp = self.rfft_plan(plan)?;
        let mut a_f = take(&mut self.buffers.a_f);
        let mut b_f = take(&mut self.buffers.b_f);
        let mut a_ft = take(&mut self.buffers.a_ft);
        let mut b_ft = take(&mut self.buffers.b_ft);
        let res = (|| {
            rfft2d_batched_into(a, &rp, &mut a_f)?;
            rfft2d_batched_into(b, &rp, &mut b_f)?;
            transpose_bdhw_hwbd_into(&a_f, &mut a_ft)?;
            transpose_bdhw_hwbd_into(&b_f, &mut b_ft)
        })();
        self.buffers.a_f = Some(a_f);
        self.buffers.b_f = Some(b_f);
        self.buffers.a_ft = Some(a_ft);
        self.buffers.b_ft = Some(b_ft);
        res
    }

    // Contract per bin, transpose back, invert, clip.
    fn contract_and_invert(
        &mut self,
        plan: &ConvPlan,
        spec: &CgemmBatch,
        swap_operands: bool,
        out_h: usize,
        out_w: usize,
    ) -> Result<RealTensor4> {
        let rp = self.rfft_plan(plan)?;
        let a_ft = take(&mut self.buffers.a_ft);
        let b_ft = take(&mut self.buffers.b_ft);
        let mut out_ft = take(&mut self.buffers.out_ft);
        let mut out_f = take(&mut self.buffers.out_f);
        let res = (|| {
            let (first, second) = if swap_operands {
                (&b_ft, &a_ft)
            } else {
                (&a_ft, &b_ft)
            };
            cgemm_batched_into(first, second, &mut out_ft, spec, plan.gemm)?;
            transpose_hwbd_bdhw_into(&out_ft, &mut out_f)?;
            irfft2d_batched(&out_f, &rp, out_h, out_w)
        })();
        self.buffers.a_ft = Some(a_ft);
        self.buffers.b_ft = Some(b_ft);
        self.buffers.out_ft = Some(out_ft);
        self.buffers.out_f = Some(out_f);
        res
    }

    /// Forward pass: x is [s][f][h][w], wgt is [f'][f][k_h][k_w]; returns
    /// [s][f'][out_h][out_w] for the plan's problem.
    pub fn fprop(&mut self, plan: &ConvPlan, x: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
        plan.validate()?;
        let p = &plan.problem;
        check_dims("fprop input", x, p.x_dims())?;
        check_dims("fprop weights", wgt, p.w_dims())?;
        if let Some(tile) = plan.tiling {
            return self.fprop_tiled(plan, x, wgt, tile);
        }
        self.spectra(plan, x, wgt)?;
        let spec = CgemmBatch {
            bins: plan.n_h * half_bins(plan.n_w),
            m: p.s,
            k_dim: p.f,
            n: p.fp,
            product: MatProduct::ABt,
            conjugate_b: true,
            accumulate: false,
        };
        self.contract_and_invert(plan, &spec, false, p.out_h(), p.out_w())
    }

    /// Input gradient: gy is [s][f'][out_h][out_w]; returns [s][f][h][w].
    /// The padded border's gradient is discarded with the clip.
    pub fn bprop(&mut self, plan: &ConvPlan, gy: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
        plan.validate()?;
        let p = &plan.problem;
        check_dims("bprop output gradient", gy, p.y_dims())?;
        check_dims("bprop weights", wgt, p.w_dims())?;
        if let Some(tile) = plan.tiling {
            return self.bprop_tiled(plan, gy, wgt, tile);
        }
        self.spectra(plan, gy, wgt)?;
        let spec = CgemmBatch {
            bins: plan.n_h * half_bins(plan.n_w),
            m: p.s,
            k_dim: p.fp,
            n: p.f,
            product: MatProduct::AB,
            conjugate_b: false,
            accumulate: false,
        };
        self.contract_and_invert(plan, &spec, false, p.h, p.w)
    }

    /// Weight gradient: returns [f'][f][k_h][k_w].
    pub fn accgrad(&mut self, plan: &ConvPlan, x: &RealTensor4, gy: &RealTensor4) -> Result<RealTensor4> {
        plan.validate()?;
        let p = &plan.problem;
        check_dims("accgrad input", x, p.x_dims())?;
        check_dims("accgrad output gradient", gy, p.y_dims())?;
        if let Some(tile) = plan.tiling {
            return self.accgrad_tiled(plan, x, gy, tile);
        }
        self.spectra(plan, x, gy)?;
        // Contract over the batch: gw bins are f'-by-f, built from the
        // conjugated gy spectrum against the x spectrum.
        let spec = CgemmBatch {
            bins: plan.n_h * half_bins(plan.n_w),
            m: p.fp,
            k_dim: p.s,
            n: p.f,
            product: MatProduct::AtB,
            conjugate_b: true,
            accumulate: false,
        };
        self.contract_and_invert(plan, &spec, true, p.k_h, p.k_w)
    }

    // Output-space tiling: each d_h-by-d_w output tile is produced by an
    // independent small pass over its (d + k - 1) input window. Windows are
    // read with clipped loads, so the implicit padding costs nothing.
    fn fprop_tiled(
        &mut self,
        plan: &ConvPlan,
        x: &RealTensor4,
        wgt: &RealTensor4,
        tile: TilePair,
    ) -> Result<RealTensor4> {
        let p = &plan.problem;
        self.tiled_corr(plan, x, wgt, p.out_h(), p.out_w(), tile)
    }

    // Valid correlation of x against wgt, tiled over the oy-by-ox output.
    fn tiled_corr(
        &mut self,
        plan: &ConvPlan,
        x: &RealTensor4,
        wgt: &RealTensor4,
        oy: usize,
        ox: usize,
        tile: TilePair,
    ) -> Result<RealTensor4> {
        let p = &plan.problem;
        let (s, planes_out) = (x.dims[0], wgt.dims[0]);
        let mut out = RealTensor4::zeroed([s, planes_out, oy, ox]);
        let mut ty = 0;
        while ty < oy {
            let cur_oh = tile.d_h.min(oy - ty);
            let mut tx = 0;
            while tx < ox {
                let cur_ow = tile.d_w.min(ox - tx);
                let win_h = cur_oh + p.k_h - 1;
                let win_w = cur_ow + p.k_w - 1;
                let window = copy_window(x, ty, tx, win_h, win_w);
                let sub = ConvProblem::new(
                    window.dims[0],
                    window.dims[1],
                    planes_out,
                    win_h,
                    win_w,
                    p.k_h,
                    p.k_w,
                );
                let sub_plan = ConvPlan {
                    problem: sub,
                    n_h: plan.n_h,
                    n_w: plan.n_w,
                    fft_path: plan.fft_path,
                    gemm: plan.gemm,
                    tiling: None,
                };
                let tile_out = self.fprop(&sub_plan, &window, wgt)?;
                for a in 0..s {
                    for b in 0..planes_out {
                        let src = tile_out.plane(a, b);
                        let dst = out.plane_mut(a, b);
                        for r in 0..cur_oh {
                            dst[(ty + r) * ox + tx..(ty + r) * ox + tx + cur_ow]
                                .copy_from_slice(&src[r * cur_ow..(r + 1) * cur_ow]);
                        }
                    }
                }
                tx += cur_ow;
            }
            ty += cur_oh;
        }
        Ok(out)
    }

    // The input gradient is itself a valid correlation once gy is embedded in
    // a (k - 1)-deep zero border and the kernel is flipped and plane-swapped,
    // so it reuses the tiled correlation driver.
    fn bprop_tiled(
        &mut self,
        plan: &ConvPlan,
        gy: &RealTensor4,
        wgt: &RealTensor4,
        tile: TilePair,
    ) -> Result<RealTensor4> {
        let p = &plan.problem;
        let (oy, ox) = (p.out_h(), p.out_w());
        let field = embed(
            gy,
            p.k_h - 1,
            p.k_w - 1,
            oy + 2 * (p.k_h - 1),
            ox + 2 * (p.k_w - 1),
        );
        let mut flipped = RealTensor4::zeroed([p.f, p.fp, p.k_h, p.k_w]);
        for j in 0..p.fp {
            for i in 0..p.f {
                for u in 0..p.k_h {
                    for v in 0..p.k_w {
                        flipped.set(i, j, u, v, wgt.at(j, i, p.k_h - 1 - u, p.k_w - 1 - v));
                    }
                }
            }
        }
        // Full-convolution extent, then drop the padded border. tiled_corr
        // takes its plane counts from the operands, so the f'-reduction
        // falls out of the swapped kernel axes.
        let full = self.tiled_corr(plan, &field, &flipped, p.padded_h(), p.padded_w(), tile)?;
        crate::tensor::clip(&full, p.h, p.w)
    }

    /// Dispatch one pass by tag. Unused operands are ignored: fprop reads
    /// (x, wgt), bprop reads (gy, wgt), accgrad reads (x, gy).
    pub fn run_pass(
        &mut self,
        pass: Pass,
        plan: &ConvPlan,
        x: &RealTensor4,
        wgt: &RealTensor4,
        gy: &RealTensor4,
    ) -> Result<RealTensor4> {
        match pass {
            Pass::Fprop => self.fprop(plan, x, wgt),
            Pass::Bprop => self.bprop(plan, gy, wgt),
            Pass::AccGrad => self.accgrad(plan, x, gy),
        }
    }

    // Weight-gradient tiling partitions the reduction over output positions:
    // each tile contributes a full k_h-by-k_w term, accumulated in order.
    fn accgrad_tiled(
        &mut self,
        plan: &ConvPlan,
        x: &RealTensor4,
        gy: &RealTensor4,
        tile: TilePair,
    ) -> Result<RealTensor4> {
        let p = &plan.problem;
        let (oy, ox) = (p.out_h(), p.out_w());
        let mut gw = RealTensor4::zeroed(p.w_dims());
        let mut ty = 0;
        while ty < oy {
            let cur_oy = tile.d_h.min(oy - ty);
            let mut tx = 0;
            while tx < ox {
                let cur_ox = tile.d_w.min(ox - tx);
                let win_h = cur_oy + p.k_h - 1;
                let win_w = cur_ox + p.k_w - 1;
                let x_win = copy_window(x, ty, tx, win_h, win_w);
                let gy_win = copy_window(gy, ty, tx, cur_oy, cur_ox);
                let sub = ConvProblem::new(p.s, p.f, p.fp, win_h, win_w, p.k_h, p.k_w);
                let sub_plan = ConvPlan {
                    problem: sub,
                    n_h: plan.n_h,
                    n_w: plan.n_w,
                    fft_path: plan.fft_path,
                    gemm: plan.gemm,
                    tiling: None,
                };
                let term = self.accgrad(&sub_plan, &x_win, &gy_win)?;
                for (dst, src) in gw.data.iter_mut().zip(&term.data) {
                    *dst += src;
                }
                tx += cur_ox;
            }
            ty += cur_oy;
        }
        Ok(gw)
    }
}

// Window of t starting at (row0, col0), th-by-tw, reading past the stored
// extent as zero. This is where a tiled pass picks up its implicit padding.
fn copy_window(t: &RealTensor4, row0: usize, col0: usize, th: usize, tw: usize) -> RealTensor4 {
    let [a, b, h, w] = t.dims;
    let mut out = RealTensor4::zeroed([a, b, th, tw]);
    let rows = th.min(h.saturating_sub(row0));
    let cols = tw.min(w.saturating_sub(col0));
    for ia in 0..a {
        for ib in 0..b {
            let src = t.plane(ia, ib);
            let dst = out.plane_mut(ia, ib);
            for r in 0..rows {
                let s0 = (row0 + r) * w + col0;
                dst[r * tw..r * tw + cols].copy_from_slice(&src[s0..s0 + cols]);
            }
        }
    }
    out
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

/// One-shot forward pass with a throwaway engine.
pub fn fprop_fft(plan: &ConvPlan, x: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
    ConvEngine::new().fprop(plan, x, wgt)
}

/// One-shot input gradient with a throwaway engine.
pub fn bprop_fft(plan: &ConvPlan, gy: &RealTensor4, wgt: &RealTensor4) -> Result<RealTensor4> {
    ConvEngine::new().bprop(plan, gy, wgt)
}

/// One-shot weight gradient with a throwaway engine.
pub fn accgrad_fft(plan: &ConvPlan, x: &RealTensor4, gy: &RealTensor4) -> Result<RealTensor4> {
    ConvEngine::new().accgrad(plan, x, gy)
}

/// The time-domain reference for [`ConvEngine::run_pass`], same operand
/// conventions.
pub fn direct_pass(
    pass: Pass,
    problem: &ConvProblem,
    x: &RealTensor4,
    wgt: &RealTensor4,
    gy: &RealTensor4,
) -> Result<RealTensor4> {
    use crate::direct_conv::{accgrad_problem, bprop_problem, fprop_problem};
    match pass {
        Pass::Fprop => fprop_problem(problem, x, wgt),
        Pass::Bprop => bprop_problem(problem, gy, wgt),
        Pass::AccGrad => accgrad_problem(problem, x, gy),
    }
}
