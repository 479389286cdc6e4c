//! Core math for mixed-resolution learned image compression.
//!
//! A feature-description network (FDNN) re-represents an image before a
//! standard codec, a post-processing network (PPNN) restores the decoded
//! result, and a virtual-codec network (VCNN) learns a differentiable stand-in
//! for "codec followed by post-processing" so gradients can reach the FDNN.
//!
//! This crate is `no_std` + `alloc`. It holds everything that does not touch
//! the filesystem or a codec implementation: images, resampling, losses with
//! analytic gradients, a small convolution engine with backprop, Adam,
//! the learning-rate schedule, patch augmentation, and the byte layouts of the
//! compressed artifact and model checkpoints.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod arch;
pub mod artifact;
pub mod augment;
pub mod checkpoint;
pub mod config;
pub mod gradcheck;
mod error;
pub mod image;
pub mod losses;
pub mod nn;
pub mod objective;
pub mod optim;
pub mod rd;
pub mod resample;
pub mod schedule;

pub use arch::{build_fdnn, build_ppnn, build_vcnn, ResolutionMode, DEFAULT_WIDTH};
pub use error::{Error, Result};
pub use image::{bpp, dequantize, quantize8, Image8, ImageGray};
pub use nn::{Network, NetworkSpec, Real, Tensor};
