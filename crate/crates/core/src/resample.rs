//! Factor-two resampling: the bilinear up-sampler used by the SSIM term and
//! the interpolation-based bootstrap of the representation.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::arch::ResolutionMode;
use crate::{Error, ImageGray, Result};

/// Two-tap bilinear weights for output index `o` of a half-pixel-aligned
/// 2× up-sampling of a length-`n` signal. Edges replicate.
#[inline]
fn taps(o: usize, n: usize) -> [(usize, f64); 2] {
    let i = o / 2;
    if o.is_multiple_of(2) {
        [(i.saturating_sub(1), 0.25), (i, 0.75)]
    } else {
        [(i, 0.75), ((i + 1).min(n - 1), 0.25)]
    }
}

/// Bilinear 2× up-sampling of a row-major `h × w` plane.
pub fn upsample2_plane<T: Float>(src: &[T], h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); oh * ow];
    for oy in 0..oh {
        let ty = taps(oy, h);
        for ox in 0..ow {
            let tx = taps(ox, w);
            let mut acc = 0.0f64;
            for &(iy, wy) in &ty {
                for &(ix, wx) in &tx {
                    acc += wy * wx * src[iy * w + ix].to_f64().unwrap_or(0.0);
                }
            }
            out[oy * ow + ox] = T::from(acc).unwrap_or_else(T::zero);
        }
    }
    out
}

/// Adjoint of [`upsample2_plane`]: maps a `2h × 2w` gradient back onto `h × w`.
pub fn upsample2_adjoint<T: Float>(grad: &[T], h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut acc = vec![0.0f64; h * w];
    for oy in 0..oh {
        let ty = taps(oy, h);
        for ox in 0..ow {
            let tx = taps(ox, w);
            let g = grad[oy * ow + ox].to_f64().unwrap_or(0.0);
            for &(iy, wy) in &ty {
                for &(ix, wx) in &tx {
                    acc[iy * w + ix] += wy * wx * g;
                }
            }
        }
    }
    acc.into_iter()
        .map(|v| T::from(v).unwrap_or_else(T::zero))
        .collect()
}

/// The linear up-sampling operator `s(·)`: bilinear 2× in LOW mode, identity in HIGH.
pub fn upsample_linear(img: &ImageGray, mode: ResolutionMode) -> ImageGray {
    match mode {
        ResolutionMode::High => img.clone(),
        ResolutionMode::Low => {
            let (h, w) = img.dims();
            let data = upsample2_plane(img.pixels(), h, w);
            ImageGray::from_clamped(2 * h, 2 * w, data).expect("doubled dims are nonzero")
        }
    }
}

/// Bilinear 2× down-sampling. With half-pixel alignment every output sample
/// sits exactly between four inputs, so this is the 2×2 mean.
pub fn downsample_half(img: &ImageGray) -> Result<ImageGray> {
    let (h, w) = img.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::validation(alloc::format!(
            "cannot halve odd dimensions {h}x{w}"
        )));
    }
    let src = img.pixels();
    ImageGray::from_fn(h / 2, w / 2, |y, x| {
        let (y0, x0) = (2 * y, 2 * x);
        let s = src[y0 * w + x0]
            + src[y0 * w + x0 + 1]
            + src[(y0 + 1) * w + x0]
            + src[(y0 + 1) * w + x0 + 1];
        (s * 0.25).clamp(0.0, 1.0)
    })
}

/// Interpolation-based initial representation `Y` of a ground-truth image.
pub fn bootstrap_representation(x: &ImageGray, mode: ResolutionMode) -> Result<ImageGray> {
    match mode {
        ResolutionMode::High => Ok(x.clone()),
        ResolutionMode::Low => downsample_half(x),
    }
}
