//! Dense kernels for cube-shaped feature maps.
//!
//! Convolutions use "same" zero padding and run as matrix products over an
//! unfolded input: row `ci * k³ + tap` of the column matrix holds the input
//! sample each output voxel sees through that tap, which matches the
//! `[out][in][kz][ky][kx]` weight layout read as an `out × in·k³` matrix.
//! Everything is accumulated in `f64`.

use super::Real;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub s: usize,
}

impl ConvGeom {
    #[inline]
    pub fn vol(&self) -> usize {
        self.s * self.s * self.s
    }

    #[inline]
    pub fn taps(&self) -> usize {
        self.k * self.k * self.k
    }

    /// Rows of the unfolded input.
    #[inline]
    pub fn rows(&self) -> usize {
        self.in_c * self.taps()
    }

    /// Output range `[lo, hi)` along one axis whose input index
    /// `o + d - h` stays inside the cube, for kernel offset `d`.
    #[inline]
    fn valid(&self, d: usize) -> (usize, usize) {
        let h = (self.k - 1) / 2;
        let lo = h.saturating_sub(d);
        let hi = (self.s + h).saturating_sub(d).min(self.s);
        (lo, hi.max(lo))
    }
}

/// `c = a·b + beta·c` with explicit strides, `a` is `m×k`, `b` is `k×n`,
/// `c` is row-major `m×n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |(r, cs): (isize, isize), rows: usize, cols: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * r + (cols as isize - 1) * cs + 1
        }
    };
    assert!(span(a_strides, m, k) as usize <= a.len());
    assert!(span(b_strides, k, n) as usize <= b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above keep every strided access inside the
    // slices, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfold `[in_c][s³]` into the `rows × s³` column matrix.
pub(crate) fn im2col<T: Real>(g: &ConvGeom, x: &[T], cols: &mut Vec<f64>) {
    let s = g.s;
    let k = g.k;
    let h = (k - 1) / 2;
    let v = g.vol();
    cols.clear();
    cols.resize(g.rows() * v, 0.0);
    for ci in 0..g.in_c {
        let src = &x[ci * v..(ci + 1) * v];
        for t in 0..g.taps() {
            let (kx, ky, kz) = (t % k, (t / k) % k, t / (k * k));
            let row = &mut cols[(ci * g.taps() + t) * v..(ci * g.taps() + t + 1) * v];
            let (zl, zh) = g.valid(kz);
            let (yl, yh) = g.valid(ky);
            let (xl, xh) = g.valid(kx);
            for z in zl..zh {
                let iz = z + kz - h;
                for y in yl..yh {
                    let iy = y + ky - h;
                    let o = (z * s + y) * s;
                    let i = (iz * s + iy) * s + kx;
                    for x in xl..xh {
                        row[o + x] = src[i + x - h].to_f64();
                    }
                }
            }
        }
    }
}

/// Fold a column-matrix gradient back onto `[in_c][s³]`, accumulating.
pub(crate) fn col2im(g: &ConvGeom, dcols: &[f64], dx: &mut [f64]) {
    let s = g.s;
    let k = g.k;
    let h = (k - 1) / 2;
    let v = g.vol();
    for ci in 0..g.in_c {
        let dst = &mut dx[ci * v..(ci + 1) * v];
        for t in 0..g.taps() {
            let (kx, ky, kz) = (t % k, (t / k) % k, t / (k * k));
            let row = &dcols[(ci * g.taps() + t) * v..(ci * g.taps() + t + 1) * v];
            let (zl, zh) = g.valid(kz);
            let (yl, yh) = g.valid(ky);
            let (xl, xh) = g.valid(kx);
            for z in zl..zh {
                let iz = z + kz - h;
                for y in yl..yh {
                    let iy = y + ky - h;
                    let o = (z * s + y) * s;
                    let i = (iz * s + iy) * s + kx;
                    for x in xl..xh {
                        dst[i + x - h] += row[o + x];
                    }
                }
            }
        }
    }
}

/// `y = relu(conv(x) + b)` with `cols` from [`im2col`]; `w` and `b` are the
/// layer's parameters widened to `f64`.
pub(crate) fn conv_relu_forward<T: Real>(g: &ConvGeom, w: &[f64], b: &[f64], cols: &[f64], z: &mut Vec<f64>, y: &mut [T]) {
    let v = g.vol();
    let r = g.rows();
    z.clear();
    z.reserve(g.out_c * v);
    for &bc in &b[..g.out_c] {
        z.extend(std::iter::repeat(bc).take(v));
    }
    gemm(g.out_c, r, v, w, (r as isize, 1), cols, (v as isize, 1), 1.0, z);
    for (o, &zv) in y.iter_mut().zip(z.iter()) {
        *o = T::from_f64(if zv > 0.0 { zv } else { 0.0 });
    }
}

/// Accumulate weight and bias gradients of one conv layer from `dz`, the
/// gradient at its pre-activation `[out_c][s³]`. When `dx` is given the
/// input gradient `[in_c][s³]` is written there.
pub(crate) fn conv_backward(
    g: &ConvGeom,
    w: &[f64],
    cols: &[f64],
    dz: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut Vec<f64>>,
    dcols: &mut Vec<f64>,
) {
    let v = g.vol();
    let r = g.rows();
    for (co, d) in db.iter_mut().enumerate().take(g.out_c) {
        *d += dz[co * v..(co + 1) * v].iter().sum::<f64>();
    }
    // dW += dz · colsᵀ
    gemm(g.out_c, v, r, dz, (v as isize, 1), cols, (1, v as isize), 1.0, dw);
    if let Some(dx) = dx {
        // dcols = Wᵀ · dz
        dcols.clear();
        dcols.resize(r * v, 0.0);
        gemm(r, g.out_c, v, w, (1, r as isize), dz, (v as isize, 1), 0.0, dcols);
        dx.clear();
        dx.resize(g.in_c * v, 0.0);
        col2im(g, dcols, dx);
    }
}

/// 2×2×2 max pooling with stride 2 (floor). Records the flat input index of
/// each maximum; ties keep the first in z, y, x scan order.
pub(crate) fn max_pool<T: Real>(channels: usize, s: usize, x: &[T], out: &mut [T], argmax: &mut [u32]) {
    let o = s / 2;
    for c in 0..channels {
        let base = c * s * s * s;
        for z in 0..o {
            for y in 0..o {
                for xx in 0..o {
                    let mut best_i = base + ((2 * z) * s + 2 * y) * s + 2 * xx;
                    let mut best = x[best_i];
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = base + ((2 * z + dz) * s + 2 * y + dy) * s + 2 * xx + dx;
                                if x[i] > best {
                                    best = x[i];
                                    best_i = i;
                                }
                            }
                        }
                    }
                    let oi = ((c * o + z) * o + y) * o + xx;
                    out[oi] = best;
                    argmax[oi] = best_i as u32;
                }
            }
        }
    }
}

/// `out[j] = Σ_i w[j][i] in[i] + b[j]`, `w` row-major `[out][in]`.
pub(crate) fn dense<T: Real>(w: &[T], b: &[T], input: &[T], out: &mut [f64]) {
    let n_in = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * n_in..(j + 1) * n_in];
        *o = b[j].to_f64() + row.iter().zip(input).map(|(a, x)| a.to_f64() * x.to_f64()).sum::<f64>();
    }
}
