//! Rate-distortion measurement of trained bundles and the JPEG-only baseline.

use std::fs;
use std::path::{Path, PathBuf};

use mixres_core::checkpoint::ModelBundle;
use mixres_core::losses::{psnr, ssim, SsimParams};
use mixres_core::rd::{sort_points, RdPoint};
use mixres_core::{bpp, quantize8, ImageGray};
use plotters::prelude::*;

use crate::codec::{Codec, CodecConfig};
use crate::error::{Error, Result};

pub const JPEG_METHOD: &str = "jpeg";

/// Quality factors of the JPEG-only comparison sweep.
pub const BASELINE_QFS: [u8; 9] = [2, 3, 4, 5, 10, 15, 20, 25, 30];

pub fn pipeline_method(bundle: &ModelBundle) -> String {
    format!("mixres-{}", bundle.mode)
}

/// Everything produced by one pipeline run on one image.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub point: RdPoint,
    pub representation: ImageGray,
    pub decoded: ImageGray,
    pub restored: ImageGray,
    pub payload: Vec<u8>,
}

/// `Y = f(X)`, `Z = jpeg(quantize8(Y))`, `Ĩ = h(Z)`; rate charged against `X`.
pub fn run_pipeline(bundle: &ModelBundle, codec: &dyn Codec, x: &ImageGray, image_id: &str) -> Result<PipelineOutput> {
    x.ensure_pipeline_size()?;
    let cfg = CodecConfig::new(bundle.quality_factor)?;
    let y = bundle.represent(x)?;
    let rt = codec.roundtrip(&quantize8(&y), cfg)?;
    let z = rt.decoded_unit();
    let restored = bundle.restore(&z)?;
    if restored.dims() != x.dims() {
        let ((left_h, left_w), (right_h, right_w)) = (restored.dims(), x.dims());
        return Err(mixres_core::Error::DimensionMismatch { left_h, left_w, right_h, right_w }.into());
    }
    let point = RdPoint {
        method: pipeline_method(bundle),
        image: image_id.to_string(),
        quality_factor: bundle.quality_factor,
        bpp: bpp(rt.payload_bytes(), x.height(), x.width())?,
        psnr_db: psnr(&restored, x)?,
        ssim: ssim(&restored, x, &SsimParams::default())?,
    };
    Ok(PipelineOutput {
        point,
        representation: y,
        decoded: z,
        restored,
        payload: rt.payload,
    })
}

pub fn eval_pipeline(bundle: &ModelBundle, codec: &dyn Codec, x: &ImageGray, image_id: &str) -> Result<RdPoint> {
    Ok(run_pipeline(bundle, codec, x, image_id)?.point)
}

/// Plain codec round trip of `quantize8(X)` at `qf`.
pub fn eval_jpeg_baseline(x: &ImageGray, qf: u8, codec: &dyn Codec, image_id: &str) -> Result<RdPoint> {
    let rt = codec.roundtrip(&quantize8(x), CodecConfig::new(qf)?)?;
    let decoded = rt.decoded_unit();
    Ok(RdPoint {
        method: JPEG_METHOD.to_string(),
        image: image_id.to_string(),
        quality_factor: qf,
        bpp: bpp(rt.payload_bytes(), x.height(), x.width())?,
        psnr_db: psnr(&decoded, x)?,
        ssim: ssim(&decoded, x, &SsimParams::default())?,
    })
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub const CSV_HEADER: [&str; 6] = ["method", "image", "qf", "bpp", "psnr_db", "ssim"];

/// Writes `rd.csv` (rows sorted by method, image, qf; shortest exact float
/// representation) and one `rd_<image>.svg` per image.
pub fn emit_report(points: &[RdPoint], out: impl AsRef<Path>) -> Result<ReportFiles> {
    let out = out.as_ref();
    if points.is_empty() {
        return Err(mixres_core::Error::Validation("no rate-distortion points to report".into()).into());
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut sorted = points.to_vec();
    sort_points(&mut sorted);

    let csv_path = out.join("rd.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(CSV_HEADER)?;
    for p in &sorted {
        w.write_record([
            p.method.clone(),
            p.image.clone(),
            p.quality_factor.to_string(),
            p.bpp.to_string(),
            p.psnr_db.to_string(),
            p.ssim.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let mut images: Vec<&str> = sorted.iter().map(|p| p.image.as_str()).collect();
    images.sort_unstable();
    images.dedup();
    let plots = images
        .iter()
        .map(|img| {
            let path = out.join(format!("rd_{}.svg", sanitize(img)));
            plot_image(&sorted, img, &path).map(|_| path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportFiles { csv: csv_path, plots })
}

/// Reads a CSV written by [`emit_report`].
pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<RdPoint>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: bad number `{}`", path.display(), field(i))))
        };
        points.push(RdPoint {
            method: field(0).to_string(),
            image: field(1).to_string(),
            quality_factor: field(2)
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad quality factor `{}`", path.display(), field(2))))?,
            bpp: num(3)?,
            psnr_db: num(4)?,
            ssim: num(5)?,
        });
    }
    Ok(points)
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn plot_image(points: &[RdPoint], image: &str, path: &Path) -> Result<()> {
    let mine: Vec<&RdPoint> = points
        .iter()
        .filter(|p| p.image == image && p.psnr_db.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &mine {
        x0 = x0.min(p.bpp);
        x1 = x1.max(p.bpp);
        y0 = y0.min(p.psnr_db);
        y1 = y1.max(p.psnr_db);
    }
    if mine.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad_x = ((x1 - x0) * 0.05).max(0.01);
    let pad_y = ((y1 - y0) * 0.05).max(0.5);

    let draw = || -> std::result::Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(image, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d((x0 - pad_x)..(x1 + pad_x), (y0 - pad_y)..(y1 + pad_y))?;
        chart
            .configure_mesh()
            .x_desc("bpp")
            .y_desc("PSNR (dB)")
            .draw()?;
        let mut methods: Vec<&str> = mine.iter().map(|p| p.method.as_str()).collect();
        methods.dedup();
        methods.sort_unstable();
        methods.dedup();
        for (i, m) in methods.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let mut curve: Vec<(f64, f64)> = mine
                .iter()
                .filter(|p| p.method == *m)
                .map(|p| (p.bpp, p.psnr_db))
                .collect();
            curve.sort_by(|a, b| a.0.total_cmp(&b.0));
            chart
                .draw_series(LineSeries::new(curve.clone(), color.stroke_width(2)))?
                .label(*m)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
            chart.draw_series(curve.into_iter().map(|c| Circle::new(c, 3, color.filled())))?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::LowerRight)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}
