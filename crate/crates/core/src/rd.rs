//! Rate-distortion points and comparison against a baseline curve.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

/// One rate-distortion measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub method: String,
    pub image: String,
    pub quality_factor: u8,
    pub bpp: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl RdPoint {
    /// Report order: method, then image, then quality factor.
    pub fn sort_key_cmp(&self, other: &RdPoint) -> Ordering {
        self.method
            .cmp(&other.method)
            .then_with(|| self.image.cmp(&other.image))
            .then_with(|| self.quality_factor.cmp(&other.quality_factor))
    }
}

pub fn sort_points(points: &mut [RdPoint]) {
    points.sort_by(RdPoint::sort_key_cmp);
}

/// Baseline PSNR at `bpp`, linearly interpolated between the baseline's
/// points sorted by rate.
///
/// Below the lowest baseline rate the lowest-rate point's PSNR is returned
/// (the baseline spends more bits for it, so comparing against it is
/// conservative). Above the highest rate the curve is undefined and `None`
/// comes back.
pub fn baseline_psnr_at(baseline: &[(f64, f64)], bpp: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = baseline.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first = *pts.first()?;
    if bpp <= first.0 {
        return Some(first.1);
    }
    for w in pts.windows(2) {
        let ((r0, p0), (r1, p1)) = (w[0], w[1]);
        if bpp <= r1 {
            if r1 == r0 {
                return Some(p0.max(p1));
            }
            let t = (bpp - r0) / (r1 - r0);
            return Some(p0 + t * (p1 - p0));
        }
    }
    None
}

/// True when `(bpp, psnr)` lies strictly above the baseline curve at its rate.
pub fn beats_baseline(bpp: f64, psnr_db: f64, baseline: &[(f64, f64)]) -> bool {
    baseline_psnr_at(baseline, bpp).is_some_and(|b| psnr_db > b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let base = [(1.0, 30.0), (0.5, 26.0), (2.0, 34.0)];
        assert_eq!(baseline_psnr_at(&base, 0.75), Some(28.0));
        assert_eq!(baseline_psnr_at(&base, 1.5), Some(32.0));
        assert_eq!(baseline_psnr_at(&base, 0.1), Some(26.0));
        assert_eq!(baseline_psnr_at(&base, 3.0), None);
        assert!(beats_baseline(0.75, 28.5, &base));
        assert!(!beats_baseline(0.75, 27.5, &base));
        assert!(!beats_baseline(3.0, 99.0, &base));
        assert_eq!(baseline_psnr_at(&[], 1.0), None);
    }

    #[test]
    fn ordering() {
        let p = |m: &str, i: &str, q: u8| RdPoint {
            method: m.into(),
            image: i.into(),
            quality_factor: q,
            bpp: 0.0,
            psnr_db: 0.0,
            ssim: 0.0,
        };
        let mut v = alloc::vec![p("jpeg", "b", 5), p("jpeg", "a", 20), p("jpeg", "a", 5), p("alpha", "z", 1)];
        sort_points(&mut v);
        let keys: Vec<(&str, &str, u8)> = v.iter().map(|x| (x.method.as_str(), x.image.as_str(), x.quality_factor)).collect();
        assert_eq!(keys, [("alpha", "z", 1), ("jpeg", "a", 5), ("jpeg", "a", 20), ("jpeg", "b", 5)]);
    }
}
