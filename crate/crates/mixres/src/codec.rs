//! The non-differentiable middle stage: 8-bit JPEG encode/decode and an
//! on-disk round-trip cache.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::jpeg::{JpegDecoder, JpegEncoder};
use image::{DynamicImage, ExtendedColorType};
use mixres_core::{Image8, ImageGray};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable naming the round-trip cache directory.
pub const CACHE_ENV: &str = "MIXRES_CACHE_DIR";

/// Codec parameters. Samples are always single-channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    quality_factor: u8,
}

impl CodecConfig {
    pub fn new(quality_factor: u8) -> Result<Self> {
        if !(1..=100).contains(&quality_factor) {
            return Err(mixres_core::Error::Validation(format!(
                "quality factor {quality_factor} outside [1, 100]"
            ))
            .into());
        }
        Ok(CodecConfig { quality_factor })
    }

    pub fn quality_factor(&self) -> u8 {
        self.quality_factor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripResult {
    pub decoded: Image8,
    pub payload: Vec<u8>,
}

impl RoundTripResult {
    pub fn payload_bytes(&self) -> usize {
        self.payload.len()
    }

    pub fn decoded_unit(&self) -> ImageGray {
        mixres_core::dequantize(&self.decoded)
    }
}

/// Anything that can stand between the FDNN and the PPNN.
pub trait Codec: Send + Sync {
    fn roundtrip(&self, img: &Image8, cfg: CodecConfig) -> Result<RoundTripResult>;
    fn decode(&self, payload: &[u8]) -> Result<Image8>;
}

/// Baseline single-channel JFIF.
#[derive(Debug, Clone, Copy, Default)]
pub struct Jpeg;

pub fn jpeg_encode(img: &Image8, cfg: CodecConfig) -> Result<Vec<u8>> {
    if img.height == 0 || img.width == 0 {
        return Err(mixres_core::Error::Validation("cannot encode an empty image".into()).into());
    }
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, cfg.quality_factor)
        .encode(&img.data, img.width as u32, img.height as u32, ExtendedColorType::L8)
        .map_err(Error::Codec)?;
    Ok(out)
}

pub fn jpeg_decode(payload: &[u8]) -> Result<Image8> {
    let dec = JpegDecoder::new(Cursor::new(payload)).map_err(Error::Codec)?;
    let luma = DynamicImage::from_decoder(dec).map_err(Error::Codec)?.into_luma8();
    let (w, h) = luma.dimensions();
    Ok(Image8::new(h as usize, w as usize, luma.into_raw())?)
}

pub fn jpeg_roundtrip(img: &Image8, cfg: CodecConfig) -> Result<RoundTripResult> {
    let payload = jpeg_encode(img, cfg)?;
    let decoded = jpeg_decode(&payload)?;
    debug_assert_eq!((decoded.height, decoded.width), (img.height, img.width));
    Ok(RoundTripResult { decoded, payload })
}

impl Codec for Jpeg {
    fn roundtrip(&self, img: &Image8, cfg: CodecConfig) -> Result<RoundTripResult> {
        jpeg_roundtrip(img, cfg)
    }

    fn decode(&self, payload: &[u8]) -> Result<Image8> {
        jpeg_decode(payload)
    }
}

/// Content hash of an 8-bit image (dimensions included).
pub fn content_hash(img: &Image8) -> String {
    let mut h = Sha256::new();
    h.update((img.height as u64).to_le_bytes());
    h.update((img.width as u64).to_le_bytes());
    h.update(&img.data);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// JPEG round trips memoized on disk, keyed by `(content hash, quality factor)`.
///
/// Each entry is `<hash>-q<qf>.jpg` plus a sidecar `<hash>-q<qf>.meta`
/// holding the line `hash,qf,bytes`. The sidecar is written last, so an
/// entry without one is incomplete and is recomputed.
#[derive(Debug, Clone)]
pub struct CachedJpeg {
    dir: PathBuf,
}

impl CachedJpeg {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(CachedJpeg { dir })
    }

    /// Uses `$MIXRES_CACHE_DIR` when set.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Self::new(PathBuf::from(d)).map(Some),
            _ => Ok(None),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, hash: &str, qf: u8) -> (PathBuf, PathBuf) {
        let stem = format!("{hash}-q{qf}");
        (self.dir.join(format!("{stem}.jpg")), self.dir.join(format!("{stem}.meta")))
    }

    fn lookup(&self, hash: &str, qf: u8) -> Option<Vec<u8>> {
        let (payload_path, meta_path) = self.paths(hash, qf);
        let meta = fs::read_to_string(meta_path).ok()?;
        let mut fields = meta.trim().split(',');
        let (h, q, n) = (fields.next()?, fields.next()?, fields.next()?);
        if h != hash || q.parse::<u8>().ok()? != qf {
            return None;
        }
        let payload = fs::read(payload_path).ok()?;
        (payload.len() == n.parse::<usize>().ok()?).then_some(payload)
    }

    fn store(&self, hash: &str, qf: u8, payload: &[u8]) -> Result<()> {
        let (payload_path, meta_path) = self.paths(hash, qf);
        write_atomic(&payload_path, payload)?;
        write_atomic(&meta_path, format!("{hash},{qf},{}\n", payload.len()).as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl Codec for CachedJpeg {
    fn roundtrip(&self, img: &Image8, cfg: CodecConfig) -> Result<RoundTripResult> {
        let hash = content_hash(img);
        let qf = cfg.quality_factor();
        if let Some(payload) = self.lookup(&hash, qf) {
            let decoded = jpeg_decode(&payload)?;
            if (decoded.height, decoded.width) == (img.height, img.width) {
                return Ok(RoundTripResult { decoded, payload });
            }
        }
        let rt = jpeg_roundtrip(img, cfg)?;
        self.store(&hash, qf, &rt.payload)?;
        Ok(rt)
    }

    fn decode(&self, payload: &[u8]) -> Result<Image8> {
        jpeg_decode(payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixres_core::losses::psnr8;
    use rand::{Rng, SeedableRng};

    fn smooth(h: usize, w: usize) -> Image8 {
        let data = (0..h * w)
            .map(|i| {
                let (y, x) = ((i / w) as f32, (i % w) as f32);
                (128.0 + 60.0 * (x / 9.0).sin() * (y / 13.0).cos() + 0.3 * x) as u8
            })
            .collect();
        Image8::new(h, w, data).unwrap()
    }

    #[test]
    fn deterministic_roundtrip() {
        let img = smooth(40, 56);
        let cfg = CodecConfig::new(30).unwrap();
        let a = jpeg_roundtrip(&img, cfg).unwrap();
        let b = jpeg_roundtrip(&img, cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.payload_bytes() > 0);
        assert_eq!((a.decoded.height, a.decoded.width), (40, 56));
    }

    #[test]
    fn quality_100_is_near_lossless() {
        let img = smooth(64, 64);
        let rt = jpeg_roundtrip(&img, CodecConfig::new(100).unwrap()).unwrap();
        assert!(psnr8(&img.data, &rt.decoded.data) >= 40.0);
    }

    #[test]
    fn constant_cheaper_than_noise() {
        let cfg = CodecConfig::new(10).unwrap();
        let flat = Image8::new(64, 64, vec![90; 64 * 64]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let noise = Image8::new(64, 64, (0..64 * 64).map(|_| rng.gen()).collect()).unwrap();
        let a = jpeg_roundtrip(&flat, cfg).unwrap().payload_bytes();
        let b = jpeg_roundtrip(&noise, cfg).unwrap().payload_bytes();
        assert!(a < b, "{a} vs {b}");
    }

    #[test]
    fn invalid_quality_rejected() {
        assert!(CodecConfig::new(0).is_err());
        assert!(CodecConfig::new(101).is_err());
    }

    #[test]
    fn corrupt_payload_is_codec_error() {
        assert!(matches!(jpeg_decode(b"not a jpeg"), Err(Error::Codec(_))));
    }

    #[test]
    fn cache_hits_match_fresh_encodes() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CachedJpeg::new(dir.path()).unwrap();
        let img = smooth(32, 48);
        let cfg = CodecConfig::new(20).unwrap();
        let fresh = cache.roundtrip(&img, cfg).unwrap();
        let hash = content_hash(&img);
        let meta = fs::read_to_string(dir.path().join(format!("{hash}-q20.meta"))).unwrap();
        assert_eq!(meta.trim(), format!("{hash},20,{}", fresh.payload_bytes()));
        let cached = cache.roundtrip(&img, cfg).unwrap();
        assert_eq!(cached, fresh);
        assert_eq!(cached, jpeg_roundtrip(&img, cfg).unwrap());
    }

    #[test]
    fn incomplete_cache_entry_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CachedJpeg::new(dir.path()).unwrap();
        let img = smooth(32, 32);
        let hash = content_hash(&img);
        fs::write(dir.path().join(format!("{hash}-q20.jpg")), b"garbage").unwrap();
        let rt = cache.roundtrip(&img, CodecConfig::new(20).unwrap()).unwrap();
        assert_eq!(rt, jpeg_roundtrip(&img, CodecConfig::new(20).unwrap()).unwrap());
    }
}
