//! Trained model bundles and their binary checkpoint layout.
//!
//! All integers are little-endian; parameters are raw IEEE-754 `f32` bits,
//! so a save/load cycle is bit-exact. A trailing FNV-1a checksum covers
//! everything before it.

use alloc::format;
use alloc::vec::Vec;

use crate::arch::ResolutionMode;
use crate::nn::{Activation, LayerKind, LayerParams, LayerSpec, Network, NetworkSpec, Tensor};
use crate::objective::clamp_representation;
use crate::{Error, ImageGray, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MRCK";
pub const CHECKPOINT_VERSION: u8 = 1;

/// The trained networks of one (mode, quality factor) regime.
///
/// Only `fdnn` and `ppnn` take part in compression and decompression; the
/// VCNN is kept for inspection of the training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub mode: ResolutionMode,
    pub quality_factor: u8,
    /// Optimizer steps taken across all sub-problems.
    pub step: u64,
    pub fdnn: Network<f32>,
    pub ppnn: Network<f32>,
    pub vcnn: Option<Network<f32>>,
}

impl ModelBundle {
    /// Untrained stand-in with fixed single-layer networks: in high mode both
    /// are the identity; in low mode the FDNN is a 2×2 mean and the PPNN a
    /// nearest-neighbour 2× upsample. Handy as a pipeline reference.
    pub fn passthrough(mode: ResolutionMode, quality_factor: u8) -> Self {
        let (k, fd_kind, pp_kind, fd_w, pp_w) = match mode {
            ResolutionMode::High => (1, LayerKind::Conv, LayerKind::Conv, 1.0, 1.0),
            ResolutionMode::Low => (2, LayerKind::Conv, LayerKind::TransposedConv, 0.25, 1.0),
        };
        let net = |kind, w: f32| {
            let layer = LayerSpec {
                kind,
                kernel: k,
                stride: k,
                in_channels: 1,
                out_channels: 1,
                activation: Activation::Identity,
            };
            let spec = NetworkSpec::new(alloc::vec![layer]).expect("single linear layer is valid");
            let params = alloc::vec![LayerParams {
                weight: alloc::vec![w; k * k],
                bias: alloc::vec![0.0],
            }];
            Network::from_parts(spec, params).expect("parameter counts match")
        };
        ModelBundle {
            mode,
            quality_factor,
            step: 0,
            fdnn: net(fd_kind, fd_w),
            ppnn: net(pp_kind, pp_w),
            vcnn: None,
        }
    }

    /// `Y = clamp(f(X, α))`.
    pub fn represent(&self, x: &ImageGray) -> Result<ImageGray> {
        if self.mode == ResolutionMode::Low && (!x.height().is_multiple_of(2) || !x.width().is_multiple_of(2)) {
            return Err(Error::validation(format!(
                "low-resolution mode needs even dimensions, got {}x{}",
                x.height(),
                x.width()
            )));
        }
        let raw = self.fdnn.forward(&Tensor::from_image(x))?;
        Ok(clamp_representation(&raw).to_image())
    }

    /// `Ĩ = h(Z, γ)`, clamped to unit range.
    pub fn restore(&self, z: &ImageGray) -> Result<ImageGray> {
        Ok(self.ppnn.forward(&Tensor::from_image(z))?.to_image())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.push(self.mode.as_byte());
        out.push(self.quality_factor);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.push(u8::from(self.vcnn.is_some()));
        write_network(&mut out, &self.fdnn);
        write_network(&mut out, &self.ppnn);
        if let Some(v) = &self.vcnn {
            write_network(&mut out, v);
        }
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 || bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format("not a model checkpoint"));
        }
        if bytes[4] != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: bytes[4],
                expected: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 8 {
            return Err(Error::format("truncated checkpoint"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if fnv1a(body) != stored {
            return Err(Error::format("checkpoint checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 5 };
        let mode = ResolutionMode::from_byte(r.u8()?)?;
        let quality_factor = r.u8()?;
        let step = r.u64()?;
        let has_vcnn = r.u8()? != 0;
        let fdnn = read_network(&mut r)?;
        let ppnn = read_network(&mut r)?;
        let vcnn = if has_vcnn { Some(read_network(&mut r)?) } else { None };
        if r.pos != body.len() {
            return Err(Error::format("trailing bytes in checkpoint"));
        }
        Ok(ModelBundle {
            mode,
            quality_factor,
            step,
            fdnn,
            ppnn,
            vcnn,
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn write_network(out: &mut Vec<u8>, net: &Network<f32>) {
    let spec = net.spec();
    out.extend_from_slice(&(spec.layers.len() as u16).to_le_bytes());
    for l in &spec.layers {
        out.push(match l.kind {
            LayerKind::Conv => 0,
            LayerKind::TransposedConv => 1,
        });
        out.push(match l.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        });
        out.extend_from_slice(&(l.kernel as u16).to_le_bytes());
        out.extend_from_slice(&(l.stride as u16).to_le_bytes());
        out.extend_from_slice(&(l.in_channels as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_channels as u32).to_le_bytes());
    }
    for p in net.params() {
        for v in p.weight.iter().chain(&p.bias) {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::format("truncated checkpoint"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format("oversized layer"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect())
    }
}

fn read_network(r: &mut Reader<'_>) -> Result<Network<f32>> {
    let n = usize::from(r.u16()?);
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let kind = match r.u8()? {
            0 => LayerKind::Conv,
            1 => LayerKind::TransposedConv,
            k => return Err(Error::format(format!("unknown layer kind {k}"))),
        };
        let activation = match r.u8()? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            a => return Err(Error::format(format!("unknown activation {a}"))),
        };
        layers.push(LayerSpec {
            kind,
            activation,
            kernel: usize::from(r.u16()?),
            stride: usize::from(r.u16()?),
            in_channels: r.u32()? as usize,
            out_channels: r.u32()? as usize,
        });
    }
    let spec = NetworkSpec::new(layers)?;
    let mut params = Vec::with_capacity(spec.layers.len());
    for l in &spec.layers {
        params.push(LayerParams {
            weight: r.f32s(l.weight_count())?,
            bias: r.f32s(l.out_channels)?,
        });
    }
    Network::from_parts(spec, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_shapes_and_values() {
        let x = ImageGray::from_fn(4, 4, |r, c| (r * 4 + c) as f32 / 15.0).unwrap();
        let hi = ModelBundle::passthrough(ResolutionMode::High, 90);
        assert_eq!(hi.represent(&x).unwrap(), x);
        assert_eq!(hi.restore(&x).unwrap(), x);
        let lo = ModelBundle::passthrough(ResolutionMode::Low, 90);
        let y = lo.represent(&x).unwrap();
        assert_eq!(y.dims(), (2, 2));
        assert!((y.get(0, 0) - 2.5 / 15.0).abs() < 1e-6);
        let up = lo.restore(&y).unwrap();
        assert_eq!(up.dims(), (4, 4));
        assert_eq!(up.get(1, 1), y.get(0, 0));
    }
    use crate::arch::{build_fdnn_width, build_ppnn_width};
    use rand::SeedableRng;

    fn bundle(with_vcnn: bool) -> ModelBundle {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mode = ResolutionMode::Low;
        ModelBundle {
            mode,
            quality_factor: 10,
            step: 1234,
            fdnn: Network::init(build_fdnn_width(mode, 3), &mut rng),
            ppnn: Network::init(build_ppnn_width(mode, 3), &mut rng),
            vcnn: with_vcnn.then(|| Network::init(build_ppnn_width(mode, 3), &mut rng)),
        }
    }

    #[test]
    fn roundtrip_bit_exact() {
        for v in [false, true] {
            let b = bundle(v);
            let bytes = b.to_bytes();
            let back = ModelBundle::from_bytes(&bytes).unwrap();
            assert_eq!(back, b);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn refuses_version_mismatch_and_corruption() {
        let mut bytes = bundle(true).to_bytes();
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(ModelBundle::from_bytes(&wrong_version), Err(Error::Version { found: 9, .. })));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(ModelBundle::from_bytes(&bytes).is_err());
        assert!(ModelBundle::from_bytes(b"MRCK").is_err());
    }

    #[test]
    fn inference_shapes() {
        let b = bundle(false);
        let x = ImageGray::constant(32, 48, 0.4).unwrap();
        let y = b.represent(&x).unwrap();
        assert_eq!(y.dims(), (16, 24));
        assert_eq!(b.restore(&y).unwrap().dims(), (32, 48));
        let odd = ImageGray::constant(33, 48, 0.4).unwrap();
        assert!(b.represent(&odd).is_err());
    }
}
