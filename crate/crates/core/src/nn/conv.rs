use alloc::vec;
use alloc::vec::Vec;

use super::Real;

/// Placement of a strided convolution between a "fine" grid (the conv input,
/// or the transposed-conv output) and a "coarse" grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub fine_c: usize,
    pub fine_h: usize,
    pub fine_w: usize,
    pub coarse_h: usize,
    pub coarse_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

/// TensorFlow-style SAME padding on the leading edge.
pub(crate) fn same_pad(fine: usize, coarse: usize, kernel: usize, stride: usize) -> usize {
    let needed = ((coarse - 1) * stride + kernel).saturating_sub(fine);
    needed / 2
}

impl Geometry {
    pub fn new(fine_c: usize, fine_h: usize, fine_w: usize, kernel: usize, stride: usize) -> Self {
        let coarse_h = fine_h / stride;
        let coarse_w = fine_w / stride;
        Geometry {
            fine_c,
            fine_h,
            fine_w,
            coarse_h,
            coarse_w,
            kernel,
            stride,
            pad_top: same_pad(fine_h, coarse_h, kernel, stride),
            pad_left: same_pad(fine_w, coarse_w, kernel, stride),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.fine_c * self.kernel * self.kernel
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.coarse_h * self.coarse_w
    }

    /// Range of coarse indices `o` with `o*stride + k - pad` inside `0..fine`.
    #[inline]
    fn valid(&self, fine: usize, coarse: usize, k: usize, pad: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if k >= pad { 0 } else { (pad - k).div_ceil(s) };
        // o*s + k - pad <= fine - 1  =>  o <= (fine - 1 + pad - k) / s
        let hi = if fine + pad > k {
            ((fine - 1 + pad - k) / s + 1).min(coarse)
        } else {
            0
        };
        (lo.min(hi), hi)
    }

    /// Unfolds `fine` (fine_c × fine_h × fine_w) into a `rows × cols` matrix.
    pub fn im2col<T: Real>(&self, fine: &[T]) -> Vec<T> {
        let (k, s) = (self.kernel, self.stride);
        let cols = self.cols();
        let mut out = vec![T::zero(); self.rows() * cols];
        for c in 0..self.fine_c {
            let plane = &fine[c * self.fine_h * self.fine_w..(c + 1) * self.fine_h * self.fine_w];
            for ky in 0..k {
                let (y0, y1) = self.valid(self.fine_h, self.coarse_h, ky, self.pad_top);
                for kx in 0..k {
                    let (x0, x1) = self.valid(self.fine_w, self.coarse_w, kx, self.pad_left);
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut out[row * cols..(row + 1) * cols];
                    for oy in y0..y1 {
                        let iy = oy * s + ky - self.pad_top;
                        let src = &plane[iy * self.fine_w..(iy + 1) * self.fine_w];
                        let drow = &mut dst[oy * self.coarse_w..(oy + 1) * self.coarse_w];
                        if s == 1 {
                            let ix0 = x0 + kx - self.pad_left;
                            drow[x0..x1].copy_from_slice(&src[ix0..ix0 + (x1 - x0)]);
                        } else {
                            for ox in x0..x1 {
                                drow[ox] = src[ox * s + kx - self.pad_left];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`im2col`](Self::im2col): scatter-adds a `rows × cols` matrix onto the fine grid.
    pub fn col2im<T: Real>(&self, cols_mat: &[T], fine: &mut [T]) {
        let (k, s) = (self.kernel, self.stride);
        let cols = self.cols();
        for c in 0..self.fine_c {
            let plane =
                &mut fine[c * self.fine_h * self.fine_w..(c + 1) * self.fine_h * self.fine_w];
            for ky in 0..k {
                let (y0, y1) = self.valid(self.fine_h, self.coarse_h, ky, self.pad_top);
                for kx in 0..k {
                    let (x0, x1) = self.valid(self.fine_w, self.coarse_w, kx, self.pad_left);
                    let row = (c * k + ky) * k + kx;
                    let src = &cols_mat[row * cols..(row + 1) * cols];
                    for oy in y0..y1 {
                        let iy = oy * s + ky - self.pad_top;
                        let dst = &mut plane[iy * self.fine_w..(iy + 1) * self.fine_w];
                        let srow = &src[oy * self.coarse_w..(oy + 1) * self.coarse_w];
                        for ox in x0..x1 {
                            dst[ox * s + kx - self.pad_left] += srow[ox];
                        }
                    }
                }
            }
        }
    }
}

/// `c (+)= a · b` with `a: m×k`, `b: k×n`, all row-major and dense.
pub(crate) fn matmul<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], acc: bool) {
    let beta = if acc { T::one() } else { T::zero() };
    T::gemm(m, k, n, a, k as isize, 1, b, n as isize, 1, beta, c, n as isize, 1);
}

/// `c (+)= aᵀ · b` with `a` stored `k×m`.
pub(crate) fn matmul_at<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], acc: bool) {
    let beta = if acc { T::one() } else { T::zero() };
    T::gemm(m, k, n, a, 1, m as isize, b, n as isize, 1, beta, c, n as isize, 1);
}

/// `c (+)= a · bᵀ` with `b` stored `n×k`.
pub(crate) fn matmul_bt<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], acc: bool) {
    let beta = if acc { T::one() } else { T::zero() };
    T::gemm(m, k, n, a, k as isize, 1, b, 1, k as isize, beta, c, n as isize, 1);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_col(g: &Geometry, fine: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.rows() * g.cols()];
        for c in 0..g.fine_c {
            for ky in 0..g.kernel {
                for kx in 0..g.kernel {
                    let row = (c * g.kernel + ky) * g.kernel + kx;
                    for oy in 0..g.coarse_h {
                        for ox in 0..g.coarse_w {
                            let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                            let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < g.fine_h && (ix as usize) < g.fine_w {
                                out[row * g.cols() + oy * g.coarse_w + ox] =
                                    fine[(c * g.fine_h + iy as usize) * g.fine_w + ix as usize];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_matches_naive() {
        for &(c, h, w, k, s) in &[(2, 6, 8, 3, 1), (1, 10, 10, 9, 1), (3, 8, 6, 3, 2), (1, 12, 8, 9, 2)] {
            let g = Geometry::new(c, h, w, k, s);
            let fine: Vec<f64> = (0..c * h * w).map(|i| i as f64 * 0.5 + 1.0).collect();
            assert_eq!(g.im2col(&fine), naive_col(&g, &fine), "{c} {h} {w} {k} {s}");
        }
    }

    #[test]
    fn col2im_is_adjoint() {
        let g = Geometry::new(2, 10, 8, 9, 2);
        let fine: Vec<f64> = (0..g.fine_c * g.fine_h * g.fine_w).map(|i| ((i * 7) % 13) as f64).collect();
        let cols: Vec<f64> = (0..g.rows() * g.cols()).map(|i| ((i * 5) % 11) as f64 - 5.0).collect();
        let lhs: f64 = g.im2col(&fine).iter().zip(&cols).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; fine.len()];
        g.col2im(&cols, &mut back);
        let rhs: f64 = fine.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn same_padding_values() {
        assert_eq!(same_pad(160, 160, 9, 1), 4);
        assert_eq!(same_pad(160, 160, 3, 1), 1);
        assert_eq!(same_pad(160, 80, 3, 2), 0);
        assert_eq!(same_pad(160, 80, 9, 2), 3);
    }

    #[test]
    fn gemm_variants() {
        // a 2x3, b 3x2
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c = [0.0f64; 4];
        matmul(2, 3, 2, &a, &b, &mut c, false);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);
        // aᵀ with a stored 3x2 (= b)
        let mut c2 = [0.0f64; 4];
        matmul_at(2, 3, 2, &b, &b, &mut c2, false);
        assert_eq!(c2, [7.0 * 7.0 + 9.0 * 9.0 + 11.0 * 11.0, 7.0 * 8.0 + 9.0 * 10.0 + 11.0 * 12.0, 7.0 * 8.0 + 9.0 * 10.0 + 11.0 * 12.0, 64.0 + 100.0 + 144.0]);
        // a · aᵀ
        let mut c3 = [1.0f64; 4];
        matmul_bt(2, 3, 2, &a, &a, &mut c3, true);
        assert_eq!(c3, [15.0, 33.0, 33.0, 78.0]);
    }
}
