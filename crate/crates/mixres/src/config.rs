//! TOML training configuration.
//!
//! Every [`TrainConfig`] field has a key of the same name; the loss weights
//! are `lambda_content`, `lambda_gradient` and `lambda_ssim`. Only
//! `quality_factor` and `dataset_dir` are mandatory:
//!
//! ```toml
//! quality_factor = 10
//! dataset_dir = "data/train"
//! mode = "low"            # default: "high" from QF 30 upward
//! outer_iterations = 3
//! ppnn_steps = 1000
//! vcnn_steps = 1000
//! fdnn_steps = 1000
//! batch_size = 16
//! learning_rate = 1e-4
//! adam_beta1 = 0.9
//! adam_beta2 = 0.999
//! lambda_content = 1.0
//! lambda_gradient = 1.0
//! lambda_ssim = 1.0
//! width = 128
//! patch_size = 160
//! patch_count = 3200
//! seed = 0
//! output_dir = "runs/q10"
//! patch_cache_dir = "runs/q10/patches"
//! ```
//!
//! Relative paths resolve against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use mixres_core::config::{LossWeights, TrainConfig};
use mixres_core::ResolutionMode;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    quality_factor: u8,
    dataset_dir: PathBuf,
    mode: Option<ResolutionMode>,
    output_dir: Option<PathBuf>,
    patch_cache_dir: Option<PathBuf>,
    outer_iterations: Option<u32>,
    ppnn_steps: Option<u64>,
    vcnn_steps: Option<u64>,
    fdnn_steps: Option<u64>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    adam_beta1: Option<f64>,
    adam_beta2: Option<f64>,
    lambda_content: Option<f64>,
    lambda_gradient: Option<f64>,
    lambda_ssim: Option<f64>,
    width: Option<usize>,
    patch_size: Option<usize>,
    patch_count: Option<usize>,
    seed: Option<u64>,
}

/// A parsed training job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub train: TrainConfig,
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub patch_cache_dir: Option<PathBuf>,
}

impl JobConfig {
    /// Parses TOML text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let qf = raw.quality_factor;
        let mut t = TrainConfig::new(raw.mode.unwrap_or_else(|| TrainConfig::default_mode_for(qf)), qf);
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = raw.$field { t.$field = v; })* };
        }
        set!(
            outer_iterations,
            ppnn_steps,
            vcnn_steps,
            fdnn_steps,
            batch_size,
            learning_rate,
            adam_beta1,
            adam_beta2,
            width,
            patch_size,
            patch_count,
            seed
        );
        let d = LossWeights::default();
        t.weights = LossWeights {
            content: raw.lambda_content.unwrap_or(d.content),
            gradient: raw.lambda_gradient.unwrap_or(d.gradient),
            ssim: raw.lambda_ssim.unwrap_or(d.ssim),
        };
        t.validate()?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        Ok(JobConfig {
            train: t,
            dataset_dir: resolve(raw.dataset_dir),
            output_dir: resolve(raw.output_dir.unwrap_or_else(|| PathBuf::from("."))),
            patch_cache_dir: raw.patch_cache_dir.map(resolve),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn with_overrides(mut self, qf: Option<u8>, mode: Option<ResolutionMode>, seed: Option<u64>) -> Result<Self> {
        if let Some(qf) = qf {
            self.train.quality_factor = qf;
            if mode.is_none() {
                self.train.mode = TrainConfig::default_mode_for(qf);
            }
        }
        if let Some(m) = mode {
            self.train.mode = m;
        }
        if let Some(s) = seed {
            self.train.seed = s;
        }
        self.train.validate()?;
        Ok(self)
    }
}
