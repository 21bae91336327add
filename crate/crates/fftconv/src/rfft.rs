//! Real-input transforms: half-spectrum 1-d operations and the 2-d plan the
//! convolution engine drives.
//!
//! A real length-n signal has a Hermitian spectrum, so only the first
//! floor(n/2)+1 bins are stored. Single rows go through the classic
//! half-length complex transform; pairs of planes share one full-length
//! complex transform each row ([`rfft1d_pair`]), which costs the same per
//! plane and is how the batched entry point handles an even plane count.
//!
//! The 2-d transform is rows first, then columns over the surviving bins.
//! Inputs shorter than the transform extent are zero-extended by clipped
//! loads; no padded copy of the input is ever materialized.

use num_complex::Complex32;

use crate::fft1d::{twiddle, ComplexPlan, Radix2Plan};
use crate::tensor::{FreqOrder, FreqTensor, Layout, RealTensor4};
use crate::{Error, Result};

/// Number of stored bins for a real transform of length n.
pub fn half_bins(n: usize) -> usize {
    n / 2 + 1
}

fn check_fits(context: &'static str, len: usize, n: usize) -> Result<()> {
    if len > n {
        return Err(Error::TransformTooSmall { n, need: len });
    }
    if n == 0 {
        return Err(Error::UnsupportedSize { n });
    }
    let _ = context;
    Ok(())
}

// Half-length packing state for single real rows of even length, or the
// fallback full-length plan when the length is odd.
#[derive(Debug, Clone)]
enum RowPlan {
    // z[j] = x[2j] + i x[2j+1]; unpack with w_n^k.
    Half {
        n: usize,
        half: ComplexPlan,
        // w_n^k for k in 0..=n/2
        tw: Vec<Complex32>,
    },
    Full {
        n: usize,
        full: ComplexPlan,
    },
}

impl RowPlan {
    fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::UnsupportedSize { n });
        }
        if n % 2 == 0 && n > 1 {
            Ok(RowPlan::Half {
                n,
                half: ComplexPlan::new(n / 2)?,
                tw: (0..=n / 2).map(|k| twiddle(n, k)).collect(),
            })
        } else {
            Ok(RowPlan::Full {
                n,
                full: ComplexPlan::new(n)?,
            })
        }
    }

    fn n(&self) -> usize {
        match self {
            RowPlan::Half { n, .. } | RowPlan::Full { n, .. } => *n,
        }
    }

    // x may be shorter than n; missing samples read as zero.
    fn forward(&self, x: &[f32], out: &mut [Complex32]) {
        let load = |j: usize| -> f32 {
            if j < x.len() {
                x[j]
            } else {
                0.0
            }
        };
        match self {
            RowPlan::Full { n, full } => {
                let mut buf: Vec<Complex32> =
                    (0..*n).map(|j| Complex32::new(load(j), 0.0)).collect();
                full.forward_inplace(&mut buf);
                out.copy_from_slice(&buf[..half_bins(*n)]);
            }
            RowPlan::Half { n, half, tw } => {
                let m = n / 2;
                let mut z: Vec<Complex32> = (0..m)
                    .map(|j| Complex32::new(load(2 * j), load(2 * j + 1)))
                    .collect();
                half.forward_inplace(&mut z);
                // E_k, O_k are the length-m spectra of the even and odd
                // samples; X_k = E_k + w_n^k O_k for k <= m.
                for k in 0..=m {
                    let a = z[k % m];
                    let b = z[(m - k) % m].conj();
                    let e = 0.5 * (a + b);
                    let od = a - b;
                    let o = Complex32::new(0.5 * od.im, -0.5 * od.re);
                    out[k] = e + tw[k] * o;
                }
            }
        }
    }

    // Half spectrum back to n real samples via Hermitian extension.
    fn inverse(&self, spec: &[Complex32], out: &mut [f32], full: &ComplexPlan) {
        let n = self.n();
        let mut buf = vec![Complex32::new(0.0, 0.0); n];
        buf[..spec.len()].copy_from_slice(spec);
        for k in spec.len()..n {
            buf[k] = spec[n - k].conj();
        }
        full.inverse_inplace(&mut buf);
        for (o, v) in out.iter_mut().zip(&buf) {
            *o = v.re;
        }
    }
}

/// Half-spectrum transform of a real signal zero-extended to length n.
pub fn rfft1d(x: &[f32], n: usize) -> Result<Vec<Complex32>> {
    check_fits("rfft1d", x.len(), n)?;
    let plan = RowPlan::new(n)?;
    let mut out = vec![Complex32::new(0.0, 0.0); half_bins(n)];
    plan.forward(x, &mut out);
    Ok(out)
}

/// Two real signals through one full-length complex transform. Returns the
/// half spectra of a and b, in that order.
pub fn rfft1d_pair(a: &[f32], b: &[f32], n: usize) -> Result<(Vec<Complex32>, Vec<Complex32>)> {
    check_fits("rfft1d_pair", a.len().max(b.len()), n)?;
    let plan = ComplexPlan::new(n)?;
    let mut buf: Vec<Complex32> = (0..n)
        .map(|j| {
            let re = if j < a.len() { a[j] } else { 0.0 };
            let im = if j < b.len() { b[j] } else { 0.0 };
            Complex32::new(re, im)
        })
        .collect();
    plan.forward_inplace(&mut buf);
    let bins = half_bins(n);
    let mut out_a = Vec::with_capacity(bins);
    let mut out_b = Vec::with_capacity(bins);
    unpack_pair_bins(&buf, bins, &mut out_a, &mut out_b);
    Ok((out_a, out_b))
}

// F = FFT(a + i b) splits by Hermitian symmetry:
// A_k = (F_k + conj(F_{n-k})) / 2, B_k = (F_k - conj(F_{n-k})) / 2i.
fn unpack_pair_bins(
    f: &[Complex32],
    bins: usize,
    out_a: &mut Vec<Complex32>,
    out_b: &mut Vec<Complex32>,
) {
    let n = f.len();
    for k in 0..bins {
        let p = f[k];
        let q = f[(n - k) % n].conj();
        out_a.push(0.5 * (p + q));
        let d = p - q;
        out_b.push(Complex32::new(0.5 * d.im, -0.5 * d.re));
    }
}

/// Memory arrangement of one transformed plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqLayout {
    /// Row bins outermost: n_h rows of half_bins(n_w) columns.
    RowMajorFreq,
    /// The two innermost axes swapped: half_bins(n_w) rows of n_h columns.
    TransposedFreq,
}

/// Plan for the 2-d real transform of planes zero-extended to n_h by n_w.
///
/// `column_order` selects how the column transforms leave their bins: Natural
/// for the mixed-radix path, BitReversedDif to elide the reorder pass when
/// both the forward and inverse transform run inside the same pipeline.
/// BitReversedDif requires a power-of-two n_h.
#[derive(Debug, Clone)]
pub struct RfftPlan {
    n_h: usize,
    n_w: usize,
    output_layout: FreqLayout,
    column_order: FreqOrder,
    row: RowPlan,
    row_full: ComplexPlan,
    col: ColPlan,
}

#[derive(Debug, Clone)]
enum ColPlan {
    Radix2(Radix2Plan),
    Any(ComplexPlan),
}

impl RfftPlan {
    pub fn new(n_h: usize, n_w: usize, output_layout: FreqLayout) -> Result<Self> {
        Self::with_order(n_h, n_w, output_layout, FreqOrder::Natural)
    }

    pub fn with_order(
        n_h: usize,
        n_w: usize,
        output_layout: FreqLayout,
        column_order: FreqOrder,
    ) -> Result<Self> {
        if n_h == 0 || n_w == 0 {
            return Err(Error::UnsupportedSize { n: 0 });
        }
        let col = match column_order {
            FreqOrder::BitReversedDif => ColPlan::Radix2(Radix2Plan::new(n_h)?),
            FreqOrder::Natural => ColPlan::Any(ComplexPlan::new(n_h)?),
        };
        Ok(RfftPlan {
            n_h,
            n_w,
            output_layout,
            column_order,
            row: RowPlan::new(n_w)?,
            row_full: ComplexPlan::new(n_w)?,
            col,
        })
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn bins_w(&self) -> usize {
        half_bins(self.n_w)
    }

    pub fn output_layout(&self) -> FreqLayout {
        self.output_layout
    }

    pub fn column_order(&self) -> FreqOrder {
        self.column_order
    }

    /// Spectrum extent in memory order: rows by cols of the output plane.
    pub fn spectrum_dims(&self) -> (usize, usize) {
        match self.output_layout {
            FreqLayout::RowMajorFreq => (self.n_h, self.bins_w()),
            FreqLayout::TransposedFreq => (self.bins_w(), self.n_h),
        }
    }

    fn col_forward(&self, buf: &mut [Complex32]) {
        match &self.col {
            ColPlan::Radix2(p) => match self.column_order {
                FreqOrder::Natural => p.dit_inplace(buf),
                FreqOrder::BitReversedDif => p.dif_inplace(buf),
            },
            ColPlan::Any(p) => p.forward_inplace(buf),
        }
    }

    fn col_inverse(&self, buf: &mut [Complex32]) {
        match &self.col {
            ColPlan::Radix2(p) => match self.column_order {
                FreqOrder::Natural => {
                    crate::fft1d::bit_reverse_permute(buf);
                    p.inverse_from_bitreversed_inplace(buf);
                }
                FreqOrder::BitReversedDif => p.inverse_from_bitreversed_inplace(buf),
            },
            ColPlan::Any(p) => p.inverse_inplace(buf),
        }
    }

    /// Transforms one real plane of extent h by w (h <= n_h, w <= n_w).
    /// Output length is n_h * bins_w, arranged per `output_layout`.
    pub fn rfft2d(&self, plane: &[f32], h: usize, w: usize) -> Result<Vec<Complex32>> {
        check_fits("rfft2d rows", h, self.n_h)?;
        check_fits("rfft2d cols", w, self.n_w)?;
        if plane.len() != h * w {
            return Err(Error::LenMismatch {
                context: "rfft2d plane",
                expected: h * w,
                got: plane.len(),
            });
        }
        let bins = self.bins_w();
        let mut rowmajor = vec![Complex32::new(0.0, 0.0); self.n_h * bins];
        for r in 0..h {
            self.row
                .forward(&plane[r * w..(r + 1) * w], &mut rowmajor[r * bins..(r + 1) * bins]);
        }
        let mut out = vec![Complex32::new(0.0, 0.0); self.n_h * bins];
        let mut col = vec![Complex32::new(0.0, 0.0); self.n_h];
        for c in 0..bins {
            for r in 0..self.n_h {
                col[r] = rowmajor[r * bins + c];
            }
            self.col_forward(&mut col);
            match self.output_layout {
                FreqLayout::RowMajorFreq => {
                    for r in 0..self.n_h {
                        out[r * bins + c] = col[r];
                    }
                }
                FreqLayout::TransposedFreq => {
                    out[c * self.n_h..(c + 1) * self.n_h].copy_from_slice(&col);
                }
            }
        }
        Ok(out)
    }

    /// Inverts one plane's spectrum and clips to the top-left out_h by out_w.
    pub fn irfft2d(&self, spec: &[Complex32], out_h: usize, out_w: usize) -> Result<Vec<f32>> {
        check_fits("irfft2d rows", out_h, self.n_h)?;
        check_fits("irfft2d cols", out_w, self.n_w)?;
        let bins = self.bins_w();
        if spec.len() != self.n_h * bins {
            return Err(Error::LenMismatch {
                context: "irfft2d spectrum",
                expected: self.n_h * bins,
                got: spec.len(),
            });
        }
        // Undo columns into row-major natural order.
        let mut rowmajor = vec![Complex32::new(0.0, 0.0); self.n_h * bins];
        let mut col = vec![Complex32::new(0.0, 0.0); self.n_h];
        for c in 0..bins {
            match self.output_layout {
                FreqLayout::RowMajorFreq => {
                    for r in 0..self.n_h {
                        col[r] = spec[r * bins + c];
                    }
                }
                FreqLayout::TransposedFreq => {
                    col.copy_from_slice(&spec[c * self.n_h..(c + 1) * self.n_h]);
                }
            }
            self.col_inverse(&mut col);
            for r in 0..out_h {
                rowmajor[r * bins + c] = col[r];
            }
        }
        let mut out = vec![0.0f32; out_h * out_w];
        let mut row = vec![0.0f32; self.n_w];
        for r in 0..out_h {
            self.row
                .inverse(&rowmajor[r * bins..(r + 1) * bins], &mut row, &self.row_full);
            out[r * out_w..(r + 1) * out_w].copy_from_slice(&row[..out_w]);
        }
        Ok(out)
    }

    // Row pass for two planes of equal extent through one complex transform
    // per row; writes both planes' row spectra in row-major order.
    fn rows_pair(
        &self,
        pa: &[f32],
        pb: &[f32],
        h: usize,
        w: usize,
        out_a: &mut [Complex32],
        out_b: &mut [Complex32],
    ) {
        let bins = self.bins_w();
        let n = self.n_w;
        let mut buf = vec![Complex32::new(0.0, 0.0); n];
        let mut ta = Vec::with_capacity(bins);
        let mut tb = Vec::with_capacity(bins);
        for r in 0..h {
            let ra = &pa[r * w..(r + 1) * w];
            let rb = &pb[r * w..(r + 1) * w];
            for j in 0..n {
                let re = if j < w { ra[j] } else { 0.0 };
                let im = if j < w { rb[j] } else { 0.0 };
                buf[j] = Complex32::new(re, im);
            }
            self.row_full.forward_inplace(&mut buf);
            ta.clear();
            tb.clear();
            unpack_pair_bins(&buf, bins, &mut ta, &mut tb);
            out_a[r * bins..(r + 1) * bins].copy_from_slice(&ta);
            out_b[r * bins..(r + 1) * bins].copy_from_slice(&tb);
        }
    }

    fn cols_forward_into(&self, rowmajor: &mut [Complex32]) {
        let bins = self.bins_w();
        let mut col = vec![Complex32::new(0.0, 0.0); self.n_h];
        for c in 0..bins {
            for r in 0..self.n_h {
                col[r] = rowmajor[r * bins + c];
            }
            self.col_forward(&mut col);
            for r in 0..self.n_h {
                rowmajor[r * bins + c] = col[r];
            }
        }
    }
}

/// Transforms every plane of `t`, pairing planes two at a time so each pair
/// shares its row transforms; an odd trailing plane takes the single path.
/// Output dims are [a][b][n_h][bins_w] in row-major (Bdhw) layout.
pub fn rfft2d_batched(t: &RealTensor4, plan: &RfftPlan) -> Result<FreqTensor> {
    let mut out = FreqTensor::zeroed([0, 0, 0, 0], Layout::Bdhw, plan.column_order());
    rfft2d_batched_into(t, plan, &mut out)?;
    Ok(out)
}

/// As [`rfft2d_batched`], reusing `out`'s allocation.
pub fn rfft2d_batched_into(t: &RealTensor4, plan: &RfftPlan, out: &mut FreqTensor) -> Result<()> {
    if plan.output_layout() != FreqLayout::RowMajorFreq {
        return Err(Error::LayoutMismatch {
            context: "batched transforms use the row-major plane layout",
        });
    }
    let [a, b, h, w] = t.dims;
    check_fits("rfft2d_batched rows", h, plan.n_h)?;
    check_fits("rfft2d_batched cols", w, plan.n_w)?;
    let bins = plan.bins_w();
    let plane_len = plan.n_h * bins;
    out.reshape([a, b, plan.n_h, bins], Layout::Bdhw, plan.column_order());
    out.data.iter_mut().for_each(|v| *v = Complex32::new(0.0, 0.0));

    let planes = a * b;
    let mut p = 0usize;
    while p + 1 < planes {
        let (pa, pb) = (p, p + 1);
        let src_a = &t.data[pa * h * w..(pa + 1) * h * w];
        let src_b = &t.data[pb * h * w..(pb + 1) * h * w];
        let (left, right) = out.data.split_at_mut(pb * plane_len);
        plan.rows_pair(
            src_a,
            src_b,
            h,
            w,
            &mut left[pa * plane_len..],
            &mut right[..plane_len],
        );
        p += 2;
    }
    if p < planes {
        let src = &t.data[p * h * w..(p + 1) * h * w];
        let dst = &mut out.data[p * plane_len..(p + 1) * plane_len];
        let bins = plan.bins_w();
        for r in 0..h {
            plan.row
                .forward(&src[r * w..(r + 1) * w], &mut dst[r * bins..(r + 1) * bins]);
        }
    }
    for p in 0..planes {
        plan.cols_forward_into(&mut out.data[p * plane_len..(p + 1) * plane_len]);
    }
    Ok(())
}

/// Inverts every plane of a batched spectrum and clips each to out_h by
/// out_w. The spectrum's order tag must match the plan's column order.
pub fn irfft2d_batched(
    spec: &FreqTensor,
    plan: &RfftPlan,
    out_h: usize,
    out_w: usize,
) -> Result<RealTensor4> {
    if spec.layout != Layout::Bdhw {
        return Err(Error::LayoutMismatch {
            context: "irfft2d_batched input",
        });
    }
    if spec.order != plan.column_order() {
        return Err(Error::OrderMismatch {
            context: "irfft2d_batched input",
        });
    }
    let [a, b, rows, bins] = spec.dims;
    if rows != plan.n_h || bins != plan.bins_w() {
        return Err(Error::DimMismatch {
            context: "irfft2d_batched spectrum dims",
            expected: [a, b, plan.n_h, plan.bins_w()],
            got: spec.dims,
        });
    }
    let plane_len = rows * bins;
    let mut out = RealTensor4::zeroed([a, b, out_h, out_w]);
    for p in 0..a * b {
        let plane = plan.irfft2d(&spec.data[p * plane_len..(p + 1) * plane_len], out_h, out_w)?;
        out.data[p * out_h * out_w..(p + 1) * out_h * out_w].copy_from_slice(&plane);
    }
    Ok(out)
}
