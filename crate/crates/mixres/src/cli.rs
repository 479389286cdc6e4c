//! Command line front end: `train`, `compress`, `decompress`, `eval` and `report`.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mixres_core::artifact::CompressedArtifact;
use mixres_core::checkpoint::ModelBundle;
use mixres_core::{quantize8, ResolutionMode};

use crate::codec::{CachedJpeg, Codec, CodecConfig, Jpeg};
use crate::config::JobConfig;
use crate::error::{Error, Result};
use crate::evaluator::{emit_report, eval_jpeg_baseline, eval_pipeline, read_report, BASELINE_QFS};
use crate::imaging::{build_named_patchset, load_dir, load_image, load_patchset, save_image, save_patchset};
use crate::trainer::Trainer;

pub const BUNDLE_FILE: &str = "bundle.mrck";
pub const LOG_FILE: &str = "train.log";

#[derive(Debug, Parser)]
#[command(name = "mixres", version, about = "Mixed-resolution image compression around a JPEG codec")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a bundle from a TOML config.
    Train(TrainArgs),
    /// Encode an image into a compressed artifact; prints its bpp.
    Compress(CodecArgs),
    /// Decode an artifact back into an image.
    Decompress(CodecArgs),
    /// Evaluate bundles and the JPEG baseline over a directory of images.
    Eval(EvalArgs),
    /// Re-render the plots of an existing rd.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub qf: Option<u8>,
    #[arg(long)]
    pub mode: Option<ResolutionMode>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained bundles; may be repeated.
    #[arg(long)]
    pub bundle: Vec<PathBuf>,
    /// Directory of test images.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for rd.csv and the plots.
    #[arg(long)]
    pub out: PathBuf,
    /// Baseline JPEG quality factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub qf: Vec<u8>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// The JPEG codec, memoized under `$MIXRES_CACHE_DIR` when that is set.
pub fn default_codec() -> Result<Box<dyn Codec>> {
    Ok(match CachedJpeg::from_env()? {
        Some(c) => Box::new(c),
        None => Box::new(Jpeg),
    })
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bundle.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelBundle::from_bytes(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Compress(a) => {
            let bpp = cmd_compress(&a.bundle, &a.input, &a.out)?;
            println!("{bpp}");
            Ok(())
        }
        Command::Decompress(a) => cmd_decompress(&a.bundle, &a.input, &a.out),
        Command::Eval(a) => {
            let qfs = if a.qf.is_empty() { BASELINE_QFS.to_vec() } else { a.qf.clone() };
            cmd_eval(&a.bundle, &a.input, &qfs, &a.out).map(|_| ())
        }
        Command::Report(a) => {
            let points = read_report(&a.input)?;
            emit_report(&points, &a.out).map(|_| ())
        }
    }
}

/// Trains one bundle; returns the path of the written checkpoint.
pub fn cmd_train(args: &TrainArgs) -> Result<PathBuf> {
    let mut job = JobConfig::load(&args.config)?.with_overrides(args.qf, args.mode, args.seed)?;
    if let Some(out) = &args.out {
        job.output_dir = out.clone();
    }
    let cfg = job.train.clone();
    if !job.dataset_dir.is_dir() {
        return Err(Error::io(
            &job.dataset_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }

    let set = match &job.patch_cache_dir {
        Some(dir) if dir.join("manifest.txt").is_file() => {
            log::info!("loading cached patches from {}", dir.display());
            load_patchset(dir)?
        }
        cache => {
            let images = load_dir(&job.dataset_dir)?;
            if images.is_empty() {
                return Err(mixres_core::Error::Validation(format!(
                    "no images found in {}",
                    job.dataset_dir.display()
                ))
                .into());
            }
            let set = build_named_patchset(&images, cfg.patch_size, cfg.patch_count, cfg.seed)?;
            if let Some(dir) = cache {
                save_patchset(&set, dir)?;
            }
            set
        }
    };
    if set.size != cfg.patch_size {
        return Err(Error::Config(format!(
            "cached patches are {0}x{0} but patch_size is {1}",
            set.size, cfg.patch_size
        )));
    }
    log::info!(
        "training {}/QF{} on {} patches of {}px",
        cfg.mode,
        cfg.quality_factor,
        set.len(),
        set.size
    );

    fs::create_dir_all(&job.output_dir).map_err(|e| Error::io(&job.output_dir, e))?;
    let log_path = job.output_dir.join(LOG_FILE);
    let log_file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let codec = default_codec()?;
    let bundle = Trainer::new(cfg, codec.as_ref())?
        .with_log(BufWriter::new(log_file))
        .alternate(&set.patches)?;
    let out = job.output_dir.join(BUNDLE_FILE);
    save_bundle(&bundle, &out)?;
    log::info!("wrote {}", out.display());
    Ok(out)
}

/// Writes the artifact for `input` and returns its bpp.
pub fn cmd_compress(bundle: &Path, input: &Path, out: &Path) -> Result<f64> {
    let bundle = load_bundle(bundle)?;
    let x = load_image(input)?;
    x.ensure_pipeline_size()?;
    let y = bundle.represent(&x)?;
    let codec = default_codec()?;
    let rt = codec.roundtrip(&quantize8(&y), CodecConfig::new(bundle.quality_factor)?)?;
    let art = CompressedArtifact::new(bundle.mode, bundle.quality_factor, x.height(), x.width(), rt.payload)?;
    fs::write(out, art.to_bytes()).map_err(|e| Error::io(out, e))?;
    Ok(art.bpp())
}

pub fn cmd_decompress(bundle: &Path, input: &Path, out: &Path) -> Result<()> {
    let bundle_path = bundle;
    let bundle = load_bundle(bundle)?;
    let bytes = fs::read(input).map_err(|e| Error::io(input, e))?;
    let art = CompressedArtifact::parse(&bytes).map_err(|e| Error::Config(format!("{}: {e}", input.display())))?;
    if (art.mode, art.quality_factor) != (bundle.mode, bundle.quality_factor) {
        return Err(mixres_core::Error::Validation(format!(
            "regime mismatch: artifact is {}/QF{} but bundle {} is {}/QF{}",
            art.mode,
            art.quality_factor,
            bundle_path.display(),
            bundle.mode,
            bundle.quality_factor
        ))
        .into());
    }
    let z = default_codec()?.decode(&art.payload)?;
    let (h, w) = art.dims();
    let expect = match art.mode {
        ResolutionMode::Low => (h / 2, w / 2),
        ResolutionMode::High => (h, w),
    };
    if (z.height, z.width) != expect {
        return Err(mixres_core::Error::Format(format!(
            "payload decodes to {}x{}, header implies {}x{}",
            z.height, z.width, expect.0, expect.1
        ))
        .into());
    }
    let restored = bundle.restore(&mixres_core::dequantize(&z))?;
    if restored.dims() != (h, w) {
        return Err(mixres_core::Error::Format(format!(
            "restored image is {}x{}, header says {h}x{w}",
            restored.height(),
            restored.width()
        ))
        .into());
    }
    save_image(&restored, out)
}

/// Evaluates every bundle and the baseline on every image under `image_dir`.
pub fn cmd_eval(bundles: &[PathBuf], image_dir: &Path, qfs: &[u8], out: &Path) -> Result<Vec<mixres_core::rd::RdPoint>> {
    let images = load_dir(image_dir)?;
    if images.is_empty() {
        return Err(mixres_core::Error::Validation(format!("no images found in {}", image_dir.display())).into());
    }
    let bundles = bundles.iter().map(load_bundle).collect::<Result<Vec<_>>>()?;
    let codec = default_codec()?;
    let mut points = Vec::new();
    for (name, x) in &images {
        for &qf in qfs {
            points.push(eval_jpeg_baseline(x, qf, codec.as_ref(), name)?);
        }
        for b in &bundles {
            points.push(eval_pipeline(b, codec.as_ref(), x, name)?);
        }
    }
    emit_report(&points, out)?;
    Ok(points)
}
