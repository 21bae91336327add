//! Tiling identities: a long valid correlation splits into short independent
//! ones, and the weight-gradient sum splits into per-tile partial sums.
//!
//! For outputs y[i] = sum_j x[i+j] c[j], the outputs [kd, kd+d) depend only
//! on inputs [kd, kd+d+w-1), so each length-d output tile is a fresh small
//! correlation over a d+w-1 input window. The weight gradient
//! g[j] = sum_i x[i+j] z[i] instead partitions the reduction index: each
//! tile contributes a full length-w term and the terms accumulate in tile
//! order, which keeps the reduction deterministic.
//!
//! Everything here works on plain slices with f64 accumulation. The engine
//! has its own tiled dispatch over tensors; this module is the place where
//! the identity itself is stated and tested against untiled arithmetic.

use crate::{Error, Result};

/// Geometry of a 1-d tiling: output tiles of length `d` (the last may be
/// short) over an n-point signal and w-point kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileSpec {
    pub d: usize,
    pub tile_input_len: usize,
    pub tile_count: usize,
}

impl TileSpec {
    /// d must lie in [1, n-w+1].
    pub fn new(n: usize, w: usize, d: usize) -> Result<Self> {
        if w == 0 || w > n {
            return Err(Error::LenMismatch {
                context: "tile kernel length",
                expected: n,
                got: w,
            });
        }
        let m = n - w + 1;
        if d == 0 || d > m {
            return Err(Error::TileOutOfRange { d, limit: m });
        }
        Ok(TileSpec {
            d,
            tile_input_len: d + w - 1,
            tile_count: m.div_ceil(d),
        })
    }
}

/// Untiled valid correlation, the oracle for the identities below:
/// y[i] = sum_j x[i+j] c[j], i in [0, n-w+1).
pub fn conv1d_valid(x: &[f32], c: &[f32]) -> Vec<f32> {
    let (n, w) = (x.len(), c.len());
    assert!(w >= 1 && w <= n, "kernel must fit in the signal");
    let m = n - w + 1;
    let mut y = vec![0.0f32; m];
    for i in 0..m {
        let mut acc = 0.0f64;
        for j in 0..w {
            acc += x[i + j] as f64 * c[j] as f64;
        }
        y[i] = acc as f32;
    }
    y
}

/// Untiled weight gradient: g[j] = sum_i x[i+j] z[i], z of length n-w+1.
pub fn accgrad1d(x: &[f32], z: &[f32], w: usize) -> Vec<f32> {
    let n = x.len();
    assert_eq!(z.len(), n - w + 1, "gradient length must be n-w+1");
    let mut g = vec![0.0f32; w];
    for j in 0..w {
        let mut acc = 0.0f64;
        for (i, zi) in z.iter().enumerate() {
            acc += x[i + j] as f64 * *zi as f64;
        }
        g[j] = acc as f32;
    }
    g
}

/// Valid correlation computed tile by tile: outputs [kd, kd+d) from inputs
/// [kd, kd+d+w-1). Concatenating the tiles reproduces the untiled result.
pub fn tiled_conv1d(x: &[f32], c: &[f32], d: usize) -> Result<Vec<f32>> {
    let (n, w) = (x.len(), c.len());
    let spec = TileSpec::new(n, w, d)?;
    let m = n - w + 1;
    let mut y = Vec::with_capacity(m);
    for k in 0..spec.tile_count {
        let start = k * d;
        let out_len = d.min(m - start);
        let tile = &x[start..start + out_len + w - 1];
        y.extend_from_slice(&conv1d_valid(tile, c));
    }
    debug_assert_eq!(y.len(), m);
    Ok(y)
}

/// Weight gradient computed tile by tile: the reduction over output
/// positions splits into d-sized chunks (plus a short remainder), each a
/// small correlation of an input window against a gradient chunk. Chunks
/// accumulate in index order.
pub fn tiled_accgrad1d(x: &[f32], z: &[f32], d: usize) -> Result<Vec<f32>> {
    let n = x.len();
    let m = z.len();
    let w = n + 1 - m;
    if m == 0 || m > n {
        return Err(Error::LenMismatch {
            context: "tiled_accgrad1d gradient length",
            expected: n,
            got: m,
        });
    }
    let spec = TileSpec::new(n, w, d)?;
    let mut acc = vec![0.0f64; w];
    for k in 0..spec.tile_count {
        let start = k * d;
        let chunk = d.min(m - start);
        let x_tile = &x[start..start + chunk + w - 1];
        let z_tile = &z[start..start + chunk];
        for j in 0..w {
            for (i, zi) in z_tile.iter().enumerate() {
                acc[j] += x_tile[i + j] as f64 * *zi as f64;
            }
        }
    }
    Ok(acc.into_iter().map(|v| v as f32).collect())
}

/// Work estimate for transform-based tiles: n/d transforms of extent d+w,
/// each costing (d+w) log2(d+w). The tile count is modeled continuously; a
/// floored count undercounts coverage once d exceeds n/2 (one tile cannot
/// produce n-w+1 outputs) and would park the argmin at that cliff instead
/// of near d of order w, where the minimum actually lies.
pub fn tile_cost_model(n: usize, w: usize, d: usize) -> f64 {
    let tiles = n as f64 / d as f64;
    let ext = (d + w) as f64;
    tiles * ext * ext.log2()
}

/// argmin of [`tile_cost_model`] over d in [1, n-w+1]. Ties break toward
/// smaller d.
pub fn optimal_tile(n: usize, w: usize) -> usize {
    let m = n - w + 1;
    let mut best = (1, tile_cost_model(n, w, 1));
    for d in 2..=m {
        let cost = tile_cost_model(n, w, d);
        if cost < best.1 {
            best = (d, cost);
        }
    }
    best.0
}

/// 2-d valid correlation over rectangular output tiles of extent d_h by d_w,
/// each drawing on a (d_h+k_h-1) by (d_w+k_w-1) input window. Planes are
/// row-major h by w slices.
pub fn tiled_conv2d(
    x: &[f32],
    h: usize,
    w: usize,
    kernel: &[f32],
    k_h: usize,
    k_w: usize,
    d_h: usize,
    d_w: usize,
) -> Result<Vec<f32>> {
    if x.len() != h * w || kernel.len() != k_h * k_w {
        return Err(Error::LenMismatch {
            context: "tiled_conv2d plane",
            expected: h * w,
            got: x.len(),
        });
    }
    TileSpec::new(h, k_h, d_h)?;
    TileSpec::new(w, k_w, d_w)?;
    let (oy, ox) = (h - k_h + 1, w - k_w + 1);
    let mut out = vec![0.0f32; oy * ox];
    let mut ty = 0;
    while ty < oy {
        let cur_oy = d_h.min(oy - ty);
        let mut tx = 0;
        while tx < ox {
            let cur_ox = d_w.min(ox - tx);
            for r in 0..cur_oy {
                for c in 0..cur_ox {
                    let (y0, x0) = (ty + r, tx + c);
                    let mut acc = 0.0f64;
                    for u in 0..k_h {
                        let row = &x[(y0 + u) * w + x0..(y0 + u) * w + x0 + k_w];
                        for (v, kv) in kernel[u * k_w..(u + 1) * k_w].iter().enumerate() {
                            acc += row[v] as f64 * *kv as f64;
                        }
                    }
                    out[y0 * ox + x0] = acc as f32;
                }
            }
            tx += cur_ox;
        }
        ty += cur_oy;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_vec(len: usize, r: &mut impl Rng) -> Vec<f32> {
        (0..len).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    fn rel_err(got: &[f32], want: &[f32]) -> f32 {
        let scale = want.iter().fold(1e-20f32, |a, v| a.max(v.abs()));
        got.iter()
            .zip(want)
            .fold(0.0f32, |a, (g, w)| a.max((g - w).abs() / scale))
    }

    #[test]
    fn spec_counts_and_lengths() {
        let spec = TileSpec::new(16, 4, 4).unwrap();
        assert_eq!(spec.tile_input_len, 7);
        assert_eq!(spec.tile_count, 4);

        // Degenerate: one full-width tile.
        let spec = TileSpec::new(16, 4, 13).unwrap();
        assert_eq!(spec.tile_count, 1);

        assert!(matches!(
            TileSpec::new(16, 4, 0),
            Err(Error::TileOutOfRange { d: 0, limit: 13 })
        ));
        assert!(matches!(
            TileSpec::new(16, 4, 14),
            Err(Error::TileOutOfRange { d: 14, limit: 13 })
        ));
    }

    #[test]
    fn single_tile_equals_untiled() {
        let mut r = rng(1);
        let x = random_vec(16, &mut r);
        let c = random_vec(4, &mut r);
        let untiled = conv1d_valid(&x, &c);
        let tiled = tiled_conv1d(&x, &c, 13).unwrap();
        assert_eq!(tiled, untiled);
    }

    #[test]
    fn scalar_tiles_equal_untiled() {
        let mut r = rng(2);
        let x = random_vec(10, &mut r);
        let c = random_vec(3, &mut r);
        let untiled = conv1d_valid(&x, &c);
        let tiled = tiled_conv1d(&x, &c, 1).unwrap();
        assert_eq!(tiled, untiled);
    }

    #[test]
    fn four_tiles_with_short_tail() {
        let mut r = rng(3);
        let x = random_vec(16, &mut r);
        let c = random_vec(4, &mut r);
        let tiled = tiled_conv1d(&x, &c, 4).unwrap();
        let untiled = conv1d_valid(&x, &c);
        assert_eq!(tiled.len(), 13);
        assert!(rel_err(&tiled, &untiled) < 1e-6);
    }

    #[test]
    fn conv_identity_holds_for_all_valid_tile_sizes() {
        let mut r = rng(4);
        for &(n, w) in &[(8usize, 2usize), (17, 5), (33, 8), (64, 7), (5, 5)] {
            let x = random_vec(n, &mut r);
            let c = random_vec(w, &mut r);
            let untiled = conv1d_valid(&x, &c);
            for d in 1..=(n - w + 1) {
                let tiled = tiled_conv1d(&x, &c, d).unwrap();
                assert!(
                    rel_err(&tiled, &untiled) < 1e-6,
                    "n={n} w={w} d={d}"
                );
            }
        }
    }

    #[test]
    fn accgrad_identity_holds_for_all_valid_tile_sizes() {
        let mut r = rng(5);
        for &(n, w) in &[(12usize, 3usize), (16, 4), (31, 6), (64, 8)] {
            let m = n - w + 1;
            let x = random_vec(n, &mut r);
            let z = random_vec(m, &mut r);
            let untiled = accgrad1d(&x, &z, w);
            for d in 1..=m {
                let tiled = tiled_accgrad1d(&x, &z, d).unwrap();
                assert!(
                    rel_err(&tiled, &untiled) < 1e-6,
                    "n={n} w={w} d={d}"
                );
            }
        }
    }

    #[test]
    fn accgrad_zero_gradient_gives_zero() {
        let mut r = rng(6);
        let x = random_vec(12, &mut r);
        let z = vec![0.0; 10];
        let g = tiled_accgrad1d(&x, &z, 4).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn accgrad_single_tile_equals_untiled() {
        let mut r = rng(7);
        let x = random_vec(12, &mut r);
        let z = random_vec(10, &mut r);
        let g = tiled_accgrad1d(&x, &z, 10).unwrap();
        assert_eq!(g, accgrad1d(&x, &z, 3));
    }

    #[test]
    fn tile_ranges_partition_the_output() {
        for &(n, w, d) in &[(16usize, 4usize, 4usize), (20, 3, 7), (9, 2, 8)] {
            let spec = TileSpec::new(n, w, d).unwrap();
            let m = n - w + 1;
            let mut covered = vec![0u8; m];
            for k in 0..spec.tile_count {
                let start = k * d;
                for slot in covered.iter_mut().skip(start).take(d.min(m - start)) {
                    *slot += 1;
                }
            }
            assert!(covered.iter().all(|c| *c == 1), "n={n} w={w} d={d}");
        }
    }

    #[test]
    fn cost_model_beats_or_ties_untiled_at_its_argmin() {
        for &(n, w) in &[(64usize, 4usize), (256, 8), (1024, 8), (100, 3)] {
            let m = n - w + 1;
            let d_star = optimal_tile(n, w);
            assert!(tile_cost_model(n, w, d_star) <= tile_cost_model(n, w, m));
        }
    }

    #[test]
    fn cost_model_argmin_is_near_kernel_length() {
        let d_star = optimal_tile(1024, 8);
        assert!((4..=32).contains(&d_star), "d* = {d_star}");
    }

    #[test]
    fn cost_model_grows_with_kernel_length() {
        let n = 512;
        let d = 16;
        let mut prev = tile_cost_model(n, 2, d);
        for w in 3..=16 {
            let cur = tile_cost_model(n, w, d);
            assert!(cur > prev, "w={w}");
            prev = cur;
        }
    }

    #[test]
    fn tiled_2d_matches_direct_plane() {
        use crate::direct_conv::fprop_direct;
        use crate::tensor::RealTensor4;

        let mut r = rng(8);
        let (h, w, k_h, k_w) = (16, 16, 4, 4);
        let x = random_vec(h * w, &mut r);
        let k = random_vec(k_h * k_w, &mut r);

        let tiled = tiled_conv2d(&x, h, w, &k, k_h, k_w, 4, 4).unwrap();

        let xt = RealTensor4::from_vec([1, 1, h, w], x.clone()).unwrap();
        let kt = RealTensor4::from_vec([1, 1, k_h, k_w], k.clone()).unwrap();
        let direct = fprop_direct(&xt, &kt).unwrap();
        assert!(rel_err(&tiled, &direct.data) < 1e-6);
    }

    #[test]
    fn tiled_2d_single_tile_and_rectangular_tiles() {
        let mut r = rng(9);
        let (h, w, k_h, k_w) = (11, 13, 3, 2);
        let x = random_vec(h * w, &mut r);
        let k = random_vec(k_h * k_w, &mut r);
        let full = tiled_conv2d(&x, h, w, &k, k_h, k_w, h - k_h + 1, w - k_w + 1).unwrap();
        for (d_h, d_w) in [(1, 1), (4, 7), (2, 12), (9, 3)] {
            let t = tiled_conv2d(&x, h, w, &k, k_h, k_w, d_h, d_w).unwrap();
            assert!(rel_err(&t, &full) < 1e-6, "d=({d_h},{d_w})");
        }
    }

    #[test]
    fn tiled_2d_impulse_kernel_shifts() {
        let (h, w) = (6, 6);
        let x: Vec<f32> = (0..h * w).map(|i| i as f32).collect();
        // Impulse at kernel position (1, 1) picks input (y+1, x+1).
        let k = vec![0.0, 0.0, 0.0, 1.0];
        let out = tiled_conv2d(&x, h, w, &k, 2, 2, 3, 3).unwrap();
        for y in 0..5 {
            for c in 0..5 {
                assert_eq!(out[y * 5 + c], x[(y + 1) * w + c + 1]);
            }
        }
    }
}
