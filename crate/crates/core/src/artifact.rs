//! The `.mric` container: a fixed 15-byte header followed by a JPEG payload.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MRIC"
//! 4       1     format version (1)
//! 5       1     mode (0 = low, 1 = high)
//! 6       1     JPEG quality factor (1..=100)
//! 7       2     ground-truth height M, big-endian
//! 9       2     ground-truth width N, big-endian
//! 11      4     payload length, big-endian
//! 15      ..    payload
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::arch::ResolutionMode;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MRIC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedArtifact {
    pub mode: ResolutionMode,
    pub quality_factor: u8,
    /// Ground-truth height M.
    pub height: u16,
    /// Ground-truth width N.
    pub width: u16,
    pub payload: Vec<u8>,
}

impl CompressedArtifact {
    pub fn new(mode: ResolutionMode, quality_factor: u8, height: usize, width: usize, payload: Vec<u8>) -> Result<Self> {
        let dim = |v: usize, name: &str| {
            u16::try_from(v)
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::validation(format!("{name} {v} does not fit the artifact header")))
        };
        if !(1..=100).contains(&quality_factor) {
            return Err(Error::validation(format!("quality factor {quality_factor} outside [1, 100]")));
        }
        if u32::try_from(payload.len()).is_err() {
            return Err(Error::validation("payload exceeds 4 GiB"));
        }
        Ok(CompressedArtifact {
            mode,
            quality_factor,
            height: dim(height, "height")?,
            width: dim(width, "width")?,
            payload,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.mode.as_byte());
        out.push(self.quality_factor);
        out.extend_from_slice(&self.height.to_be_bytes());
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(format!(
                "artifact is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::format("bad magic, not an MRIC artifact"));
        }
        if bytes[4] != VERSION {
            return Err(Error::Version {
                found: bytes[4],
                expected: VERSION,
            });
        }
        let mode = ResolutionMode::from_byte(bytes[5])?;
        let quality_factor = bytes[6];
        if !(1..=100).contains(&quality_factor) {
            return Err(Error::format(format!("quality factor {quality_factor} outside [1, 100]")));
        }
        let height = u16::from_be_bytes([bytes[7], bytes[8]]);
        let width = u16::from_be_bytes([bytes[9], bytes[10]]);
        if height == 0 || width == 0 {
            return Err(Error::format("zero ground-truth dimension"));
        }
        let len = u32::from_be_bytes([bytes[11], bytes[12], bytes[13], bytes[14]]) as usize;
        let rest = &bytes[HEADER_LEN..];
        if len != rest.len() {
            return Err(Error::format(format!(
                "header announces {len} payload bytes but {} follow",
                rest.len()
            )));
        }
        Ok(CompressedArtifact {
            mode,
            quality_factor,
            height,
            width,
            payload: rest.to_vec(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (usize::from(self.height), usize::from(self.width))
    }

    /// Bits per ground-truth pixel of the payload (header excluded).
    pub fn bpp(&self) -> f64 {
        crate::bpp(self.payload.len(), self.dims().0, self.dims().1).expect("dims are nonzero")
    }
}
