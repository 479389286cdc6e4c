//! Single-channel images in unit range and their 8-bit counterparts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::{Error, Result};

/// Smallest side accepted by the training and compression paths.
pub const MIN_PIPELINE_SIDE: usize = 16;

/// An M×N grayscale image with every sample in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageGray {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::validation("image has a zero dimension"));
        }
        if data.len() != height * width {
            return Err(Error::validation(format!(
                "expected {} samples for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("sample {v} outside [0, 1]")));
        }
        Ok(ImageGray {
            height,
            width,
            data,
        })
    }

    /// Builds an image from arbitrary reals, clamping into `[0, 1]`.
    /// NaN maps to 0.
    pub fn from_clamped(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(height, width, data)
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.data
    }

    pub(crate) fn ensure_same_dims(&self, other: &ImageGray) -> Result<()> {
        ensure_dims(self.dims(), other.dims())
    }

    /// Rejects images too small for the training and compression paths.
    pub fn ensure_pipeline_size(&self) -> Result<()> {
        if self.height < MIN_PIPELINE_SIDE || self.width < MIN_PIPELINE_SIDE {
            return Err(Error::validation(format!(
                "image {}x{} is below the {MIN_PIPELINE_SIDE}x{MIN_PIPELINE_SIDE} minimum",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

pub(crate) fn ensure_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            left_h: a.0,
            left_w: a.1,
            right_h: b.0,
            right_w: b.1,
        });
    }
    Ok(())
}

/// An 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image8 {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Image8 {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::validation(format!(
                "expected {} bytes for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Image8 {
            height,
            width,
            data,
        })
    }
}

/// Maps one real sample to 8 bits: `round(clamp(v, 0, 1) * 255)`, ties away from zero.
#[inline]
pub fn quantize_sample(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    Float::round(f64::from(v) * 255.0) as u8
}

pub fn quantize8(img: &ImageGray) -> Image8 {
    Image8 {
        height: img.height,
        width: img.width,
        data: img.data.iter().map(|&v| quantize_sample(v)).collect(),
    }
}

pub fn dequantize(img: &Image8) -> ImageGray {
    ImageGray {
        height: img.height,
        width: img.width,
        data: img.data.iter().map(|&b| f32::from(b) / 255.0).collect(),
    }
}

/// Bits per pixel of a payload, charged against the ground-truth resolution
/// `height × width` (not the resolution of the coded representation).
pub fn bpp(payload_bytes: usize, height: usize, width: usize) -> Result<f64> {
    let area = height * width;
    if area == 0 {
        return Err(Error::validation("bpp of a zero-area image"));
    }
    Ok(8.0 * payload_bytes as f64 / area as f64)
}
