//! A small CPU convolution engine with reverse-mode gradients.
//!
//! Tensors are single samples in channel-major (C, H, W) layout; batching is
//! left to the caller, which sums per-sample gradients in a fixed order.

mod conv;
mod network;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::iter::Sum;
use core::ops::AddAssign;

use num_traits::Float;

pub use network::{Activation, Grads, LayerKind, LayerParams, LayerSpec, Network, NetworkSpec, Tape};

use crate::ImageGray;

/// Scalar type the engine runs on. `f32` for training, `f64` for gradient checks.
pub trait Real: Float + Default + Debug + Send + Sync + Sum + AddAssign + 'static {
    /// `c = a · b + beta · c` for row-major `m×k` times `k×n`, with explicit strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

macro_rules! impl_real {
    ($t:ty, $f:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                let last = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    (rows as isize - 1) * rs + (cols as isize - 1) * cs
                };
                assert!(k == 0 || last(m, k, rsa, csa) < a.len() as isize);
                assert!(k == 0 || last(k, n, rsb, csb) < b.len() as isize);
                assert!(last(m, n, rsc, csc) < c.len() as isize);
                // SAFETY: the asserts above bound every index the kernel touches.
                unsafe {
                    $f(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// One sample: `channels × height × width`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_plane(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), height * width);
        Tensor {
            channels: 1,
            height,
            width,
            data,
        }
    }

    pub fn from_image(img: &ImageGray) -> Self {
        let data = img
            .pixels()
            .iter()
            .map(|&v| T::from(v).unwrap_or_else(T::zero))
            .collect();
        Self::from_plane(img.height(), img.width(), data)
    }

    /// First channel as an image, clamped into `[0, 1]`.
    pub fn to_image(&self) -> ImageGray {
        let plane = &self.data[..self.height * self.width];
        let data = plane.iter().map(|v| v.to_f32().unwrap_or(0.0)).collect();
        ImageGray::from_clamped(self.height, self.width, data).expect("tensor has nonzero dims")
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
