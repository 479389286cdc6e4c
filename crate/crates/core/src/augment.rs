//! Training patch extraction: random crop, quarter-turn rotation and optional
//! horizontal flip, all reproducible from a manifest.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, ImageGray, Result};

/// How one patch was cut from its source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ManifestEntry {
    pub source_id: usize,
    /// Column of the crop's top-left corner.
    pub x: usize,
    /// Row of the crop's top-left corner.
    pub y: usize,
    /// Clockwise quarter turns, 0..=3.
    pub rot: u8,
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub size: usize,
    pub patches: Vec<ImageGray>,
    pub manifest: Vec<ManifestEntry>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Checks that every manifest entry reproduces its patch from `sources`.
    pub fn verify(&self, sources: &[ImageGray]) -> Result<()> {
        if self.manifest.len() != self.patches.len() {
            return Err(Error::validation("manifest and patch counts differ"));
        }
        for (i, (e, p)) in self.manifest.iter().zip(&self.patches).enumerate() {
            let src = sources
                .get(e.source_id)
                .ok_or_else(|| Error::validation(format!("patch {i}: unknown source {}", e.source_id)))?;
            if &apply_entry(src, e, self.size)? != p {
                return Err(Error::validation(format!("patch {i} does not match its manifest entry")));
            }
        }
        Ok(())
    }
}

/// Cuts the `size × size` patch described by `entry` out of `src`.
pub fn apply_entry(src: &ImageGray, entry: &ManifestEntry, size: usize) -> Result<ImageGray> {
    if entry.x + size > src.width() || entry.y + size > src.height() {
        return Err(Error::validation(format!(
            "crop {size}x{size} at ({}, {}) leaves the {}x{} source",
            entry.x,
            entry.y,
            src.height(),
            src.width()
        )));
    }
    if entry.rot > 3 {
        return Err(Error::validation(format!("rotation {} is not a quarter turn count", entry.rot)));
    }
    let n = size - 1;
    ImageGray::from_fn(size, size, |r, c| {
        let c = if entry.flip { n - c } else { c };
        // undo `rot` clockwise quarter turns
        let (sr, sc) = match entry.rot {
            0 => (r, c),
            1 => (n - c, r),
            2 => (n - r, n - c),
            _ => (c, n - r),
        };
        src.get(entry.y + sr, entry.x + sc)
    })
}

/// Draws `target_count` augmented patches uniformly over (source, crop
/// offset, rotation, flip). Each patch has its own RNG stream derived from
/// `seed`, so the result does not depend on evaluation order.
pub fn build_patchset(
    images: &[ImageGray],
    size: usize,
    target_count: usize,
    seed: u64,
) -> Result<PatchSet> {
    if images.is_empty() {
        return Err(Error::validation("no source images"));
    }
    if size == 0 {
        return Err(Error::validation("patch size must be positive"));
    }
    if target_count < images.len() {
        return Err(Error::validation(format!(
            "target count {target_count} is below the {} source images",
            images.len()
        )));
    }
    for (i, img) in images.iter().enumerate() {
        if img.height() < size || img.width() < size {
            return Err(Error::validation(format!(
                "image #{i} ({}x{}) is smaller than the {size}x{size} patch",
                img.height(),
                img.width()
            )));
        }
    }
    let mut manifest = Vec::with_capacity(target_count);
    let mut patches = Vec::with_capacity(target_count);
    for i in 0..target_count {
        let entry = sample_entry(images, size, seed, i as u64);
        patches.push(apply_entry(&images[entry.source_id], &entry, size)?);
        manifest.push(entry);
    }
    Ok(PatchSet {
        size,
        patches,
        manifest,
    })
}

fn sample_entry(images: &[ImageGray], size: usize, seed: u64, index: u64) -> ManifestEntry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let source_id = rng.gen_range(0..images.len());
    let img = &images[source_id];
    ManifestEntry {
        source_id,
        x: rng.gen_range(0..=img.width() - size),
        y: rng.gen_range(0..=img.height() - size),
        rot: rng.gen_range(0..4u8),
        flip: rng.gen_bool(0.5),
    }
}
