//! Training criteria and quality metrics.
//!
//! Every loss is exposed twice: an [`ImageGray`] form returning the value, and
//! a plane form (`*_grad`) over raw row-major slices that also returns the
//! gradient with respect to its first argument. Accumulation is always in f64.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::image::{ensure_dims, quantize_sample};
use crate::{ImageGray, Result};

/// Constants and window of the SSIM term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub c1: f64,
    pub c2: f64,
    /// Side of the square Gaussian window (odd).
    pub window: usize,
    pub sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            c1: 0.0001,
            c2: 0.0009,
            window: 11,
            sigma: 1.5,
        }
    }
}

impl SsimParams {
    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn kernel_1d(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let mut k: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                Float::exp(-(d * d) / (2.0 * self.sigma * self.sigma))
            })
            .collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    }
}

/// A composite objective value with its per-term breakdown (unweighted terms).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub content: f64,
    pub gradient: f64,
    pub ssim: f64,
}

impl LossValue {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.content.is_finite()
            && self.gradient.is_finite()
            && self.ssim.is_finite()
    }
}

#[inline]
fn f<T: Float>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

#[inline]
fn back<T: Float>(v: f64) -> T {
    T::from(v).unwrap_or_else(T::nan)
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute difference and its gradient with respect to `pred`.
pub fn l1_content_grad<T: Float>(pred: &[T], target: &[T]) -> (f64, Vec<T>) {
    assert_eq!(pred.len(), target.len());
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = f(p) - f(t);
            sum += d.abs();
            back(sign(d) / n)
        })
        .collect();
    (sum / n, grad)
}

/// L1 distance between horizontal and vertical forward differences
/// (replicated edge, so the last column/row contributes a zero difference),
/// normalized by the pixel count. Gradient is with respect to `pred`.
pub fn l1_gradient_grad<T: Float>(pred: &[T], target: &[T], h: usize, w: usize) -> (f64, Vec<T>) {
    assert_eq!(pred.len(), h * w);
    assert_eq!(target.len(), h * w);
    let n = (h * w) as f64;
    let mut sum = 0.0;
    let mut g = vec![0.0f64; h * w];
    let at = |s: &[T], i: usize| f(s[i]);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                let d = (at(pred, i + 1) - at(pred, i)) - (at(target, i + 1) - at(target, i));
                sum += d.abs();
                let s = sign(d);
                g[i + 1] += s;
                g[i] -= s;
            }
            if y + 1 < h {
                let d = (at(pred, i + w) - at(pred, i)) - (at(target, i + w) - at(target, i));
                sum += d.abs();
                let s = sign(d);
                g[i + w] += s;
                g[i] -= s;
            }
        }
    }
    (sum / n, g.into_iter().map(|v| back(v / n)).collect())
}

fn blur(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, &kt)| kt * row[clamp(x as isize + t as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, &kt)| kt * tmp[clamp(y as isize + t as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn blur_adjoint(g: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let gv = g[y * w + x];
            for (t, &kt) in k.iter().enumerate() {
                tmp[clamp(y as isize + t as isize - r, h) * w + x] += kt * gv;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let gv = tmp[y * w + x];
            for (t, &kt) in k.iter().enumerate() {
                out[y * w + clamp(x as isize + t as isize - r, w)] += kt * gv;
            }
        }
    }
    out
}

/// `1 − mean SSIM` over per-pixel Gaussian windows (edges replicated), and
/// its gradient with respect to `pred`.
pub fn ssim_loss_grad<T: Float>(
    pred: &[T],
    target: &[T],
    h: usize,
    w: usize,
    p: &SsimParams,
) -> (f64, Vec<T>) {
    let (loss, g) = ssim_core(pred, target, h, w, p, true);
    (loss, g.unwrap_or_default())
}

fn ssim_core<T: Float>(
    pred: &[T],
    target: &[T],
    h: usize,
    w: usize,
    p: &SsimParams,
    want_grad: bool,
) -> (f64, Option<Vec<T>>) {
    assert_eq!(pred.len(), h * w);
    assert_eq!(target.len(), h * w);
    let k = p.kernel_1d();
    let a: Vec<f64> = pred.iter().map(|&v| f(v)).collect();
    let b: Vec<f64> = target.iter().map(|&v| f(v)).collect();
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| u * v).collect() };

    let mu_a = blur(&a, h, w, &k);
    let mu_b = blur(&b, h, w, &k);
    let e_aa = blur(&prod(&a, &a), h, w, &k);
    let e_bb = blur(&prod(&b, &b), h, w, &k);
    let e_ab = blur(&prod(&a, &b), h, w, &k);

    let n = (h * w) as f64;
    let mut sum = 0.0;
    let (mut g_mu, mut g_aa, mut g_ab) = if want_grad {
        (vec![0.0; h * w], vec![0.0; h * w], vec![0.0; h * w])
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    for i in 0..h * w {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num1 = 2.0 * ma * mb + p.c1;
        let num2 = 2.0 * cov + p.c2;
        let den1 = ma * ma + mb * mb + p.c1;
        let den2 = var_a + var_b + p.c2;
        let s = num1 * num2 / (den1 * den2);
        sum += s;
        if want_grad {
            let d_mu = 2.0 * mb * num2 / (den1 * den2) - s * 2.0 * ma / den1;
            let d_var = -s / den2;
            let d_cov = 2.0 * num1 / (den1 * den2);
            // loss = 1 - mean(s)
            g_mu[i] = -(d_mu - 2.0 * ma * d_var - mb * d_cov) / n;
            g_aa[i] = -d_var / n;
            g_ab[i] = -d_cov / n;
        }
    }
    let loss = 1.0 - sum / n;
    if !want_grad {
        return (loss, None);
    }
    let t_mu = blur_adjoint(&g_mu, h, w, &k);
    let t_aa = blur_adjoint(&g_aa, h, w, &k);
    let t_ab = blur_adjoint(&g_ab, h, w, &k);
    let grad = (0..h * w)
        .map(|i| back(t_mu[i] + 2.0 * a[i] * t_aa[i] + b[i] * t_ab[i]))
        .collect();
    (loss, Some(grad))
}

pub fn l1_content(a: &ImageGray, b: &ImageGray) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(l1_content_grad(a.pixels(), b.pixels()).0)
}

pub fn l1_gradient(a: &ImageGray, b: &ImageGray) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(l1_gradient_grad(a.pixels(), b.pixels(), a.height(), a.width()).0)
}

pub fn ssim_loss(a: &ImageGray, b: &ImageGray, p: &SsimParams) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(ssim_core(a.pixels(), b.pixels(), a.height(), a.width(), p, false).0)
}

/// Mean SSIM (`1 − ssim_loss`).
pub fn ssim(a: &ImageGray, b: &ImageGray, p: &SsimParams) -> Result<f64> {
    Ok(1.0 - ssim_loss(a, b, p)?)
}

/// PSNR in dB over 8-bit samples, peak 255. Identical inputs give `+∞`.
pub fn psnr8(a: &[u8], b: &[u8]) -> f64 {
    assert_eq!(a.len(), b.len());
    let se: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    if se == 0 {
        return f64::INFINITY;
    }
    let mse = se as f64 / a.len() as f64;
    10.0 * Float::log10(255.0 * 255.0 / mse)
}

/// PSNR after 8-bit quantization of both images.
pub fn psnr(a: &ImageGray, b: &ImageGray) -> Result<f64> {
    ensure_dims(a.dims(), b.dims())?;
    let qa: Vec<u8> = a.pixels().iter().map(|&v| quantize_sample(v)).collect();
    let qb: Vec<u8> = b.pixels().iter().map(|&v| quantize_sample(v)).collect();
    Ok(psnr8(&qa, &qb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn img(h: usize, w: usize, v: &[f32]) -> ImageGray {
        ImageGray::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn l1_content_examples() {
        let x = ImageGray::from_fn(4, 4, |y, x| (y + x) as f32 / 6.0).unwrap();
        assert_eq!(l1_content(&x, &x).unwrap(), 0.0);
        let zeros = ImageGray::constant(3, 3, 0.0).unwrap();
        let ones = ImageGray::constant(3, 3, 1.0).unwrap();
        assert_eq!(l1_content(&zeros, &ones).unwrap(), 1.0);
        let a = img(1, 2, &[0.2, 0.8]);
        let b = img(1, 2, &[0.5, 0.4]);
        assert!((l1_content(&a, &b).unwrap() - 0.35).abs() < 1e-6);
    }

    #[test]
    fn l1_gradient_examples() {
        let a = img(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let b = ImageGray::constant(2, 2, 0.0).unwrap();
        assert!((l1_gradient(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        let c = img(2, 2, &[0.25, 0.75, 0.25, 0.75]);
        let c_shift = img(2, 2, &[0.5, 1.0, 0.5, 1.0]);
        assert!(l1_gradient(&c, &c_shift).unwrap().abs() < 1e-7);
    }

    #[test]
    fn ssim_examples() {
        let p = SsimParams::default();
        let x = ImageGray::from_fn(20, 20, |y, x| ((y * 7 + x * 3) % 17) as f32 / 16.0).unwrap();
        assert!(ssim_loss(&x, &x, &p).unwrap().abs() < 1e-12);
        let half = ImageGray::constant(12, 12, 0.5).unwrap();
        assert!(ssim_loss(&half, &half, &p).unwrap().abs() < 1e-12);
        let zeros = ImageGray::constant(12, 12, 0.0).unwrap();
        let ones = ImageGray::constant(12, 12, 1.0).unwrap();
        let expected = 1.0 - p.c1 / (1.0 + p.c1);
        assert!((ssim_loss(&zeros, &ones, &p).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn window_is_normalized() {
        let k = SsimParams::default().kernel_1d();
        assert_eq!(k.len(), 11);
        let total: f64 = k.iter().flat_map(|a| k.iter().map(move |b| a * b)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_examples() {
        let black = ImageGray::constant(4, 4, 0.0).unwrap();
        let white = ImageGray::constant(4, 4, 1.0).unwrap();
        assert_eq!(psnr(&black, &black).unwrap(), f64::INFINITY);
        assert!(psnr(&black, &white).unwrap().abs() < 1e-12);
        let a = [10u8; 16];
        let b = [11u8; 16];
        assert!((psnr8(&a, &b) - 48.1308).abs() < 0.01);
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = ImageGray::constant(4, 4, 0.0).unwrap();
        let b = ImageGray::constant(4, 5, 0.0).unwrap();
        let p = SsimParams::default();
        assert!(matches!(l1_content(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(l1_gradient(&a, &b).is_err());
        assert!(ssim_loss(&a, &b, &p).is_err());
        assert!(psnr(&a, &b).is_err());
    }
}
