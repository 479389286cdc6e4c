//! Raster I/O, luma conversion, and on-disk patch-set caching.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage};
use mixres_core::augment::{build_patchset, ManifestEntry, PatchSet};
use mixres_core::{quantize8, ImageGray};

use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// Converts a decoded raster to unit-range luma.
pub fn to_gray(img: &DynamicImage) -> mixres_core::Result<ImageGray> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = if img.color().has_color() {
        img.to_rgb32f()
            .pixels()
            .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
            .collect()
    } else {
        img.to_luma16().pixels().map(|p| f32::from(p[0]) / 65535.0).collect()
    };
    ImageGray::from_clamped(h, w, data)
}

/// Loads a PNG, BMP or JPEG file as a grayscale image in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGray> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(to_gray(&img)?)
}

pub fn to_gray_image(img: &ImageGray) -> GrayImage {
    let q = quantize8(img);
    GrayImage::from_raw(q.width as u32, q.height as u32, q.data).expect("buffer matches dims")
}

/// Writes an 8-bit grayscale raster; the format follows the file extension.
pub fn save_image(img: &ImageGray, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    to_gray_image(img).save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn is_raster(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "bmp" | "jpg" | "jpeg")
    )
}

/// Loads every raster in `dir`, sorted by file name. Returns `(stem, image)` pairs.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, ImageGray)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_raster(p))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
            load_image(&p).map(|img| (stem, img))
        })
        .collect()
}

/// Builds a patch set, naming the offending file when a source is too small.
pub fn build_named_patchset(
    images: &[(String, ImageGray)],
    size: usize,
    target_count: usize,
    seed: u64,
) -> Result<PatchSet> {
    if let Some((name, img)) = images.iter().find(|(_, i)| i.height() < size || i.width() < size) {
        return Err(Error::Core(mixres_core::Error::Validation(format!(
            "image `{name}` ({}x{}) is smaller than the {size}x{size} patch",
            img.height(),
            img.width()
        ))));
    }
    let plain: Vec<ImageGray> = images.iter().map(|(_, i)| i.clone()).collect();
    Ok(build_patchset(&plain, size, target_count, seed)?)
}

const MANIFEST: &str = "manifest.txt";

/// Writes `patch_00000.png`… plus `manifest.txt` with one
/// `source_id,x,y,rot,flip` line per patch.
pub fn save_patchset(set: &PatchSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, p) in set.patches.iter().enumerate() {
        save_image(p, dir.join(format!("patch_{i:05}.png")))?;
    }
    let path = dir.join(MANIFEST);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    for e in &set.manifest {
        writeln!(f, "{},{},{},{},{}", e.source_id, e.x, e.y, e.rot, u8::from(e.flip))
            .map_err(|err| Error::io(&path, err))?;
    }
    Ok(())
}

pub fn parse_manifest_line(line: &str) -> Option<ManifestEntry> {
    let mut it = line.trim().split(',');
    let entry = ManifestEntry {
        source_id: it.next()?.parse().ok()?,
        x: it.next()?.parse().ok()?,
        y: it.next()?.parse().ok()?,
        rot: it.next()?.parse().ok().filter(|r| *r < 4)?,
        flip: match it.next()? {
            "0" => false,
            "1" => true,
            _ => return None,
        },
    };
    it.next().is_none().then_some(entry)
}

/// Reads a patch set written by [`save_patchset`].
pub fn load_patchset(dir: impl AsRef<Path>) -> Result<PatchSet> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut manifest = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        manifest.push(parse_manifest_line(&line).ok_or_else(|| {
            Error::Config(format!("{}:{}: malformed manifest line `{line}`", path.display(), n + 1))
        })?);
    }
    let patches = (0..manifest.len())
        .map(|i| load_image(dir.join(format!("patch_{i:05}.png"))))
        .collect::<Result<Vec<_>>>()?;
    let size = patches.first().map_or(0, ImageGray::height);
    if patches.iter().any(|p| p.dims() != (size, size)) {
        return Err(Error::Config(format!("{}: patches are not all {size}x{size}", dir.display())));
    }
    Ok(PatchSet {
        size,
        patches,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma, Rgb};

    #[test]
    fn gray_png_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        for (v, expect) in [(255u8, 1.0f32), (0, 0.0)] {
            let p = dir.path().join(format!("c{v}.png"));
            ImageBuffer::from_pixel(20, 18, Luma([v])).save(&p).unwrap();
            let img = load_image(&p).unwrap();
            assert_eq!(img.dims(), (18, 20));
            assert!(img.pixels().iter().all(|&x| x == expect));
        }
    }

    #[test]
    fn rgb_uses_bt601() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("red.bmp");
        ImageBuffer::from_pixel(4, 4, Rgb([255u8, 0, 0])).save(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert!(img.pixels().iter().all(|&v| (v - 0.299).abs() <= 1.0 / 255.0));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_image("/nonexistent/x.png"), Err(Error::Io { .. })));
    }

    #[test]
    fn zero_byte_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.png");
        fs::write(&p, b"").unwrap();
        assert!(load_image(&p).is_err());
    }

    #[test]
    fn manifest_lines() {
        let e = parse_manifest_line("3,10,20,1,0").unwrap();
        assert_eq!((e.source_id, e.x, e.y, e.rot, e.flip), (3, 10, 20, 1, false));
        assert!(parse_manifest_line("3,10,20,4,0").is_none());
        assert!(parse_manifest_line("3,10,20,1").is_none());
        assert!(parse_manifest_line("3,10,20,1,1,9").is_none());
    }

    #[test]
    fn patchset_cache_roundtrip() {
        let src = ImageGray::from_fn(40, 44, |y, x| ((y * 5 + x * 3) % 256) as f32 / 255.0).unwrap();
        let set = build_named_patchset(&[("a".into(), src.clone())], 32, 5, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_patchset(&set, dir.path()).unwrap();
        let back = load_patchset(dir.path()).unwrap();
        assert_eq!(back, set);
        back.verify(&[src]).unwrap();
    }

    #[test]
    fn small_source_named() {
        let small = ImageGray::constant(20, 20, 0.5).unwrap();
        let err = build_named_patchset(&[("tiny".into(), small)], 32, 1, 0).unwrap_err();
        assert!(err.to_string().contains("`tiny`"));
    }
}
