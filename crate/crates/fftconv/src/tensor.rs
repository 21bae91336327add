//! Dense 4-d tensors, the padded and clipped views the engine moves data
//! through, and the binary interchange format used by the command-line tools.
//!
//! Real tensors are always batch-major: index order [batch][plane][row][col],
//! abbreviated BDHW. Frequency tensors additionally carry a layout tag,
//! because the pipeline transposes them so that each frequency bin holds a
//! small contiguous matrix (HWBD), and an order tag recording whether the row
//! axis is in natural or bit-reversed bin order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;

use crate::{Error, Result};

/// Row-major real tensor indexed [a][b][i][j].
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor4 {
    pub dims: [usize; 4],
    pub data: Vec<f32>,
}

impl RealTensor4 {
    pub fn zeroed(dims: [usize; 4]) -> Self {
        let len = dims.iter().product();
        RealTensor4 {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f32>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::LenMismatch {
                context: "tensor payload",
                expected: len,
                got: data.len(),
            });
        }
        Ok(RealTensor4 { dims, data })
    }

    #[inline]
    pub fn offset(&self, a: usize, b: usize, i: usize, j: usize) -> usize {
        ((a * self.dims[1] + b) * self.dims[2] + i) * self.dims[3] + j
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize, i: usize, j: usize) -> f32 {
        self.data[self.offset(a, b, i, j)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, i: usize, j: usize, v: f32) {
        let o = self.offset(a, b, i, j);
        self.data[o] = v;
    }

    /// The contiguous i-by-j plane at [a][b].
    pub fn plane(&self, a: usize, b: usize) -> &[f32] {
        let len = self.dims[2] * self.dims[3];
        let start = self.offset(a, b, 0, 0);
        &self.data[start..start + len]
    }

    pub fn plane_mut(&mut self, a: usize, b: usize) -> &mut [f32] {
        let len = self.dims[2] * self.dims[3];
        let start = self.offset(a, b, 0, 0);
        &mut self.data[start..start + len]
    }
}

/// Uniform tensor filled from `rng`, entries in [-1, 1).
pub fn random_tensor<R: rand::Rng>(dims: [usize; 4], rng: &mut R) -> RealTensor4 {
    let len = dims.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    RealTensor4 { dims, data }
}

/// Memory order of a frequency tensor's four axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// [a][b][row bin][col bin]; the natural order transforms produce.
    Bdhw,
    /// [row bin][col bin][a][b]; one contiguous a-by-b matrix per bin.
    Hwbd,
}

/// Bin order along the row axis of a frequency tensor.
///
/// BitReversedDif spectra come from the reorder-free forward transform and
/// are only ever consumed by pointwise work or the matching inverse; nothing
/// else may interpret their bin positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqOrder {
    Natural,
    BitReversedDif,
}

/// Complex tensor with physical extents `dims` in memory order, tagged with
/// what the axes mean (`layout`) and how row bins are ordered (`order`).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqTensor {
    pub dims: [usize; 4],
    pub layout: Layout,
    pub order: FreqOrder,
    pub data: Vec<Complex32>,
}

impl FreqTensor {
    pub fn zeroed(dims: [usize; 4], layout: Layout, order: FreqOrder) -> Self {
        let len = dims.iter().product();
        FreqTensor {
            dims,
            layout,
            order,
            data: vec![Complex32::new(0.0, 0.0); len],
        }
    }

    #[inline]
    pub fn offset(&self, i0: usize, i1: usize, i2: usize, i3: usize) -> usize {
        ((i0 * self.dims[1] + i1) * self.dims[2] + i2) * self.dims[3] + i3
    }

    /// Grows `data` to match `dims`, reusing the existing allocation.
    pub fn reshape(&mut self, dims: [usize; 4], layout: Layout, order: FreqOrder) {
        let len = dims.iter().product();
        self.dims = dims;
        self.layout = layout;
        self.order = order;
        self.data.resize(len, Complex32::new(0.0, 0.0));
        if self.data.len() > len {
            self.data.truncate(len);
        }
    }
}

/// Target spatial extents for zero extension. Padding is appended at the
/// bottom and right only; the origin never moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadSpec {
    pub n_h: usize,
    pub n_w: usize,
}

/// Zero-extends every plane of `t` to `pad.n_h` by `pad.n_w`.
pub fn zero_pad(t: &RealTensor4, pad: PadSpec) -> Result<RealTensor4> {
    let [a, b, h, w] = t.dims;
    if pad.n_h < h || pad.n_w < w {
        return Err(Error::DimMismatch {
            context: "zero_pad target smaller than source",
            expected: [a, b, pad.n_h, pad.n_w],
            got: t.dims,
        });
    }
    let mut out = RealTensor4::zeroed([a, b, pad.n_h, pad.n_w]);
    for ia in 0..a {
        for ib in 0..b {
            let src = t.plane(ia, ib);
            let dst = out.plane_mut(ia, ib);
            for i in 0..h {
                dst[i * pad.n_w..i * pad.n_w + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
        }
    }
    Ok(out)
}

/// Keeps the top-left `out_h` by `out_w` window of every plane.
pub fn clip(t: &RealTensor4, out_h: usize, out_w: usize) -> Result<RealTensor4> {
    let [a, b, h, w] = t.dims;
    if out_h > h || out_w > w {
        return Err(Error::DimMismatch {
            context: "clip window larger than source",
            expected: [a, b, out_h, out_w],
            got: t.dims,
        });
    }
    let mut out = RealTensor4::zeroed([a, b, out_h, out_w]);
    for ia in 0..a {
        for ib in 0..b {
            let src = t.plane(ia, ib);
            let dst = out.plane_mut(ia, ib);
            for i in 0..out_h {
                dst[i * out_w..(i + 1) * out_w].copy_from_slice(&src[i * w..i * w + out_w]);
            }
        }
    }
    Ok(out)
}

/// [a][b][i][j] -> [i][j][a][b]: after this, bin (i, j) is one contiguous
/// a-by-b matrix, which is what the batched complex product consumes.
pub fn transpose_bdhw_hwbd(t: &FreqTensor) -> Result<FreqTensor> {
    if t.layout != Layout::Bdhw {
        return Err(Error::LayoutMismatch {
            context: "transpose_bdhw_hwbd input",
        });
    }
    let mut out = FreqTensor::zeroed(
        [t.dims[2], t.dims[3], t.dims[0], t.dims[1]],
        Layout::Hwbd,
        t.order,
    );
    permute_23_01(t, &mut out);
    Ok(out)
}

/// Inverse of [`transpose_bdhw_hwbd`].
pub fn transpose_hwbd_bdhw(t: &FreqTensor) -> Result<FreqTensor> {
    if t.layout != Layout::Hwbd {
        return Err(Error::LayoutMismatch {
            context: "transpose_hwbd_bdhw input",
        });
    }
    let mut out = FreqTensor::zeroed(
        [t.dims[2], t.dims[3], t.dims[0], t.dims[1]],
        Layout::Bdhw,
        t.order,
    );
    permute_23_01(t, &mut out);
    Ok(out)
}

// out[(i2, i3, i0, i1)] = t[(i0, i1, i2, i3)], walking the source in memory
// order so reads are sequential.
fn permute_23_01(t: &FreqTensor, out: &mut FreqTensor) {
    let [d0, d1, d2, d3] = t.dims;
    let mut src = 0usize;
    for i0 in 0..d0 {
        for i1 in 0..d1 {
            let flat01 = i0 * d1 + i1;
            for i2 in 0..d2 {
                let row_base = (i2 * d3) * d0 * d1 + flat01;
                for i3 in 0..d3 {
                    out.data[row_base + i3 * d0 * d1] = t.data[src];
                    src += 1;
                }
            }
        }
    }
}

/// In-place variants that reuse the destination's allocation.
pub fn transpose_bdhw_hwbd_into(t: &FreqTensor, out: &mut FreqTensor) -> Result<()> {
    if t.layout != Layout::Bdhw {
        return Err(Error::LayoutMismatch {
            context: "transpose_bdhw_hwbd input",
        });
    }
    out.reshape(
        [t.dims[2], t.dims[3], t.dims[0], t.dims[1]],
        Layout::Hwbd,
        t.order,
    );
    permute_23_01(t, out);
    Ok(())
}

pub fn transpose_hwbd_bdhw_into(t: &FreqTensor, out: &mut FreqTensor) -> Result<()> {
    if t.layout != Layout::Hwbd {
        return Err(Error::LayoutMismatch {
            context: "transpose_hwbd_bdhw input",
        });
    }
    out.reshape(
        [t.dims[2], t.dims[3], t.dims[0], t.dims[1]],
        Layout::Bdhw,
        t.order,
    );
    permute_23_01(t, out);
    Ok(())
}

/// A tensor as stored on disk: either real scalars or interleaved complex.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredTensor {
    Real(RealTensor4),
    Complex(FreqTensor),
}

const MAGIC: [u8; 4] = *b"FBT1";
const DTYPE_REAL32: u8 = 0;
const DTYPE_COMPLEX64: u8 = 1;

/// Writes the binary tensor format: magic "FBT1", u32 rank (always 4), four
/// u32 dims, u8 dtype (0 = real32, 1 = complex64 interleaved), then the
/// row-major little-endian payload.
pub fn write_tensor<P: AsRef<Path>>(path: P, t: &StoredTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&4u32.to_le_bytes())?;
    let dims = match t {
        StoredTensor::Real(t) => t.dims,
        StoredTensor::Complex(t) => t.dims,
    };
    for d in dims {
        let d = u32::try_from(d).map_err(|_| Error::FileFormat {
            message: format!("dim {d} does not fit in u32"),
        })?;
        w.write_all(&d.to_le_bytes())?;
    }
    match t {
        StoredTensor::Real(t) => {
            w.write_all(&[DTYPE_REAL32])?;
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        StoredTensor::Complex(t) => {
            w.write_all(&[DTYPE_COMPLEX64])?;
            for v in &t.data {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the format written by [`write_tensor`]. Complex payloads come back
/// tagged Bdhw and Natural; the file format does not store those tags.
pub fn read_tensor<P: AsRef<Path>>(path: P) -> Result<StoredTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::BadMagic { got: magic });
    }
    let rank = read_u32(&mut r)?;
    if rank != 4 {
        return Err(Error::FileFormat {
            message: format!("rank {rank}, only rank 4 is supported"),
        });
    }
    let mut dims = [0usize; 4];
    let mut len = 1u64;
    for d in &mut dims {
        let v = read_u32(&mut r)?;
        *d = v as usize;
        len = len.checked_mul(v as u64).ok_or(Error::FileFormat {
            message: "dim product overflows".to_string(),
        })?;
    }
    if len > (usize::MAX / 8) as u64 {
        return Err(Error::FileFormat {
            message: "dim product overflows".to_string(),
        });
    }
    let len = len as usize;
    let mut dtype = [0u8; 1];
    r.read_exact(&mut dtype)?;
    match dtype[0] {
        DTYPE_REAL32 => {
            let data = read_f32s(&mut r, len)?;
            Ok(StoredTensor::Real(RealTensor4 { dims, data }))
        }
        DTYPE_COMPLEX64 => {
            let raw = read_f32s(&mut r, len * 2)?;
            let data = raw
                .chunks_exact(2)
                .map(|p| Complex32::new(p[0], p[1]))
                .collect();
            Ok(StoredTensor::Complex(FreqTensor {
                dims,
                layout: Layout::Bdhw,
                order: FreqOrder::Natural,
                data,
            }))
        }
        other => Err(Error::FileFormat {
            message: format!("unknown dtype {other}"),
        }),
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::FileFormat {
                message: format!("payload truncated, wanted {count} scalars"),
            }
        } else {
            Error::from(e)
        }
    })?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ramp(dims: [usize; 4]) -> RealTensor4 {
        let len: usize = dims.iter().product();
        RealTensor4::from_vec(dims, (0..len).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn pad_then_clip_recovers_source() {
        let t = ramp([2, 3, 4, 5]);
        let padded = zero_pad(&t, PadSpec { n_h: 9, n_w: 8 }).unwrap();
        assert_eq!(padded.dims, [2, 3, 9, 8]);
        assert_eq!(padded.at(1, 2, 3, 4), t.at(1, 2, 3, 4));
        assert_eq!(padded.at(1, 2, 8, 7), 0.0);
        let back = clip(&padded, 4, 5).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn pad_to_same_dims_is_a_copy() {
        let t = ramp([1, 2, 3, 3]);
        let padded = zero_pad(&t, PadSpec { n_h: 3, n_w: 3 }).unwrap();
        assert_eq!(padded, t);
    }

    #[test]
    fn clip_to_single_cell() {
        let t = ramp([1, 1, 4, 4]);
        let c = clip(&t, 1, 1).unwrap();
        assert_eq!(c.dims, [1, 1, 1, 1]);
        assert_eq!(c.data, vec![0.0]);
    }

    #[test]
    fn pad_smaller_than_source_errors() {
        let t = ramp([1, 1, 4, 4]);
        assert!(matches!(
            zero_pad(&t, PadSpec { n_h: 3, n_w: 4 }),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(clip(&t, 5, 1), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn single_element_survives_pad_clip_cycle() {
        let t = RealTensor4::from_vec([1, 1, 1, 1], vec![7.25]).unwrap();
        let padded = zero_pad(&t, PadSpec { n_h: 4, n_w: 4 }).unwrap();
        let back = clip(&padded, 1, 1).unwrap();
        assert_eq!(back, t);
    }

    fn ramp_freq(dims: [usize; 4]) -> FreqTensor {
        let len: usize = dims.iter().product();
        FreqTensor {
            dims,
            layout: Layout::Bdhw,
            order: FreqOrder::Natural,
            data: (0..len)
                .map(|v| Complex32::new(v as f32, -(v as f32)))
                .collect(),
        }
    }

    #[test]
    fn transpose_moves_every_element() {
        let t = ramp_freq([2, 3, 4, 5]);
        let tt = transpose_bdhw_hwbd(&t).unwrap();
        assert_eq!(tt.dims, [4, 5, 2, 3]);
        assert_eq!(tt.layout, Layout::Hwbd);
        for a in 0..2 {
            for b in 0..3 {
                for i in 0..4 {
                    for j in 0..5 {
                        assert_eq!(
                            t.data[t.offset(a, b, i, j)],
                            tt.data[tt.offset(i, j, a, b)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn transpose_round_trip_is_identity() {
        let t = ramp_freq([3, 2, 5, 4]);
        let back = transpose_hwbd_bdhw(&transpose_bdhw_hwbd(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn transpose_checks_layout_tag() {
        let t = ramp_freq([1, 1, 2, 2]);
        assert!(matches!(
            transpose_hwbd_bdhw(&t),
            Err(Error::LayoutMismatch { .. })
        ));
    }

    #[test]
    fn transpose_preserves_order_tag() {
        let mut t = ramp_freq([1, 2, 4, 3]);
        t.order = FreqOrder::BitReversedDif;
        let tt = transpose_bdhw_hwbd(&t).unwrap();
        assert_eq!(tt.order, FreqOrder::BitReversedDif);
    }

    #[test]
    fn file_round_trip_real_is_bit_exact() {
        let dir = std::env::temp_dir().join("fftconv-tensor-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("real.fbt");

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut t = random_tensor([2, 1, 3, 4], &mut rng);
        t.data[0] = -0.0;
        t.data[1] = f32::MIN_POSITIVE / 2.0;
        t.data[2] = 1.0e-38;

        write_tensor(&path, &StoredTensor::Real(t.clone())).unwrap();
        let back = match read_tensor(&path).unwrap() {
            StoredTensor::Real(t) => t,
            _ => panic!("wrong dtype"),
        };
        assert_eq!(back.dims, t.dims);
        for (a, b) in back.data.iter().zip(&t.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn file_round_trip_complex() {
        let dir = std::env::temp_dir().join("fftconv-tensor-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("complex.fbt");

        let t = ramp_freq([1, 2, 2, 3]);
        write_tensor(&path, &StoredTensor::Complex(t.clone())).unwrap();
        let back = match read_tensor(&path).unwrap() {
            StoredTensor::Complex(t) => t,
            _ => panic!("wrong dtype"),
        };
        assert_eq!(back.dims, t.dims);
        assert_eq!(back.data, t.data);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = std::env::temp_dir().join("fftconv-tensor-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad-magic.fbt");
        std::fs::write(&path, b"NOPE____________________").unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = std::env::temp_dir().join("fftconv-tensor-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.fbt");
        let t = ramp([1, 1, 2, 2]);
        write_tensor(&path, &StoredTensor::Real(t)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_tensor(&path),
            Err(Error::FileFormat { .. })
        ));
    }

    #[test]
    fn oversized_dims_are_rejected() {
        let dir = std::env::temp_dir().join("fftconv-tensor-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("overflow.fbt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FBT1");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        for _ in 0..4 {
            bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_tensor(&path),
            Err(Error::FileFormat { .. })
        ));
    }
}
