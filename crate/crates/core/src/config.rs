//! Knobs of the alternating training schedule.

use crate::arch::{ResolutionMode, DEFAULT_WIDTH};
use crate::schedule::INITIAL_LR;
use crate::{Error, Result};

/// Relative weights of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub content: f64,
    pub gradient: f64,
    pub ssim: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            content: 1.0,
            gradient: 1.0,
            ssim: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: ResolutionMode,
    pub quality_factor: u8,
    pub outer_iterations: u32,
    pub ppnn_steps: u64,
    pub vcnn_steps: u64,
    pub fdnn_steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub weights: LossWeights,
    /// Hidden feature maps per layer.
    pub width: usize,
    pub patch_size: usize,
    pub patch_count: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Full-size defaults for one (mode, quality factor) regime.
    pub fn new(mode: ResolutionMode, quality_factor: u8) -> Self {
        TrainConfig {
            mode,
            quality_factor,
            outer_iterations: 3,
            ppnn_steps: 1000,
            vcnn_steps: 1000,
            fdnn_steps: 1000,
            batch_size: 16,
            learning_rate: INITIAL_LR,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            weights: LossWeights::default(),
            width: DEFAULT_WIDTH,
            patch_size: 160,
            patch_count: 3200,
            seed: 0,
        }
    }

    /// Mode used when none is given: full resolution from QF 30 upward.
    pub fn default_mode_for(quality_factor: u8) -> ResolutionMode {
        if quality_factor >= 30 {
            ResolutionMode::High
        } else {
            ResolutionMode::Low
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::validation(m));
        if !(1..=100).contains(&self.quality_factor) {
            return fail("quality_factor must lie in [1, 100]");
        }
        if self.outer_iterations == 0 || self.batch_size == 0 || self.width == 0 {
            return fail("outer_iterations, batch_size and width must be positive");
        }
        if self.patch_count == 0 {
            return fail("patch_count must be positive");
        }
        if self.patch_size < crate::image::MIN_PIPELINE_SIDE || !self.patch_size.is_multiple_of(2) {
            return fail("patch_size must be even and at least 16");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(b > 0.0 && b < 1.0) {
                return fail("adam betas must lie in (0, 1)");
            }
        }
        let w = self.weights;
        if [w.content, w.gradient, w.ssim].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return fail("loss weights must be finite and non-negative");
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        u64::from(self.outer_iterations) * (self.ppnn_steps + self.vcnn_steps + self.fdnn_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = TrainConfig::new(ResolutionMode::Low, 10);
        cfg.validate().unwrap();
        assert_eq!(cfg.learning_rate, 1e-4);
        assert_eq!((cfg.adam_beta1, cfg.adam_beta2), (0.9, 0.999));
        assert_eq!((cfg.patch_size, cfg.patch_count), (160, 3200));
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = TrainConfig::new(ResolutionMode::Low, 10);
        cfg.quality_factor = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::new(ResolutionMode::Low, 10);
        cfg.adam_beta2 = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::new(ResolutionMode::Low, 10);
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mode_threshold() {
        assert_eq!(TrainConfig::default_mode_for(20), ResolutionMode::Low);
        assert_eq!(TrainConfig::default_mode_for(30), ResolutionMode::High);
    }
}
