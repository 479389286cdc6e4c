use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixres::cli::{load_bundle, save_bundle};
use mixres::codec::{jpeg_encode, CodecConfig};
use mixres::imaging::{load_image, save_image};
use mixres_core::artifact::{CompressedArtifact, HEADER_LEN};
use mixres_core::checkpoint::ModelBundle;
use mixres_core::{quantize8, ImageGray, ResolutionMode};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mixres"));
    c.env_remove("MIXRES_CACHE_DIR").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn test_images() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/test")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_dataset(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for k in 0..2 {
        let img = ImageGray::from_fn(40, 40, |r, c| ((r * 7 + c * 3 + k * 11) % 40) as f32 / 40.0).unwrap();
        save_image(&img, dir.join(format!("img{k}.png"))).unwrap();
    }
}

const TINY: &str = r#"
quality_factor = 10
dataset_dir = "train"
outer_iterations = 1
ppnn_steps = 2
vcnn_steps = 3
fdnn_steps = 1
batch_size = 2
width = 4
patch_size = 16
patch_count = 4
output_dir = "run"
"#;

#[test]
fn train_smoke_writes_one_checkpoint_and_full_log() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&dir.path().join("train"));
    let cfg = dir.path().join("job.toml");
    fs::write(&cfg, TINY).unwrap();
    let o = run(&["train", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = dir.path().join("run");
    let bundle = load_bundle(run_dir.join("bundle.mrck")).unwrap();
    assert_eq!((bundle.mode, bundle.quality_factor, bundle.step), (ResolutionMode::Low, 10, 6));
    let log = fs::read_to_string(run_dir.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 6);
    assert!(log.lines().all(|l| l.split(',').count() == 8));
    let checkpoints = fs::read_dir(&run_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "mrck"))
        .count();
    assert_eq!(checkpoints, 1);
}

#[test]
fn train_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&dir.path().join("train"));
    let cfg = dir.path().join("job.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("other");
    let o = run(&["train", "--config", s(&cfg), "--qf", "35", "--mode", "low", "--seed", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = load_bundle(out.join("bundle.mrck")).unwrap();
    assert_eq!((b.mode, b.quality_factor), (ResolutionMode::Low, 35));
}

#[test]
fn missing_quality_factor_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    fs::write(&cfg, "dataset_dir = \"train\"\n").unwrap();
    let o = run(&["train", "--config", s(&cfg)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("quality_factor"), "{}", stderr(&o));
}

#[test]
fn unknown_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    fs::write(&cfg, format!("{TINY}\nbatchsize = 3\n")).unwrap();
    let o = run(&["train", "--config", s(&cfg)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("batchsize"), "{}", stderr(&o));
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    fs::write(&cfg, TINY).unwrap();
    let o = run(&["train", "--config", s(&cfg)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("dataset directory not found"), "{}", stderr(&o));
}

#[test]
fn compress_then_decompress_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bundle_path = dir.path().join("low.mrck");
    let bundle = ModelBundle::passthrough(ResolutionMode::Low, 10);
    save_bundle(&bundle, &bundle_path).unwrap();
    let input = test_images().join("camera.png");
    let art_path = dir.path().join("camera.mric");

    let o = run(&["compress", "--bundle", s(&bundle_path), "--in", s(&input), "--out", s(&art_path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(&art_path).unwrap();
    let art = CompressedArtifact::parse(&bytes).unwrap();
    assert_eq!(art.dims(), (256, 256));
    assert_eq!(bytes.len(), HEADER_LEN + art.payload.len());

    let printed: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(printed, 8.0 * art.payload.len() as f64 / (256.0 * 256.0));

    let x = load_image(&input).unwrap();
    let y = bundle.represent(&x).unwrap();
    assert_eq!(y.dims(), (128, 128));
    assert_eq!(art.payload, jpeg_encode(&quantize8(&y), CodecConfig::new(10).unwrap()).unwrap());

    let out = dir.path().join("camera_out.png");
    let o = run(&["decompress", "--bundle", s(&bundle_path), "--in", s(&art_path), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(load_image(&out).unwrap().dims(), (256, 256));

    let again = dir.path().join("again.mric");
    assert!(run(&["compress", "--bundle", s(&bundle_path), "--in", s(&input), "--out", s(&again)])
        .status
        .success());
    assert_eq!(fs::read(&again).unwrap(), bytes);
}

#[test]
fn decompress_refuses_other_regime() {
    let dir = tempfile::tempdir().unwrap();
    let low = dir.path().join("low.mrck");
    let high = dir.path().join("high.mrck");
    save_bundle(&ModelBundle::passthrough(ResolutionMode::Low, 10), &low).unwrap();
    save_bundle(&ModelBundle::passthrough(ResolutionMode::High, 10), &high).unwrap();
    let art = dir.path().join("a.mric");
    let input = test_images().join("coffee.png");
    assert!(run(&["compress", "--bundle", s(&low), "--in", s(&input), "--out", s(&art)]).status.success());
    let o = run(&["decompress", "--bundle", s(&high), "--in", s(&art), "--out", s(&dir.path().join("x.png"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("regime mismatch"), "{}", stderr(&o));
}

#[test]
fn decompress_rejects_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.mrck");
    save_bundle(&ModelBundle::passthrough(ResolutionMode::High, 10), &b).unwrap();
    let art = dir.path().join("junk.mric");
    fs::write(&art, b"JUNKJUNKJUNKJUNKJUNK").unwrap();
    let o = run(&["decompress", "--bundle", s(&b), "--in", s(&art), "--out", s(&dir.path().join("x.png"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn compress_rejects_odd_input_in_low_mode() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.mrck");
    save_bundle(&ModelBundle::passthrough(ResolutionMode::Low, 10), &b).unwrap();
    let img = dir.path().join("odd.png");
    save_image(&ImageGray::constant(33, 40, 0.3).unwrap(), &img).unwrap();
    let o = run(&["compress", "--bundle", s(&b), "--in", s(&img), "--out", s(&dir.path().join("o.mric"))]);
    assert!(!o.status.success());
}

#[test]
fn eval_counts_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["eval".into()];
    for qf in [5u8, 10, 20] {
        let p = dir.path().join(format!("q{qf}.mrck"));
        save_bundle(&ModelBundle::passthrough(ResolutionMode::Low, qf), &p).unwrap();
        args.extend(["--bundle".into(), s(&p).into()]);
    }
    let out = dir.path().join("report");
    args.extend(["--in".into(), s(&test_images()).into(), "--qf".into(), "5,10,20".into()]);
    args.extend(["--out".into(), s(&out).into()]);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("rd.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24);
    for img in ["astronaut", "camera", "chelsea", "coffee"] {
        assert!(out.join(format!("rd_{img}.svg")).is_file());
    }
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("rd.csv")).unwrap(), csv);

    let replot = dir.path().join("replot");
    let o = run(&["report", "--in", s(&out.join("rd.csv")), "--out", s(&replot)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(replot.join("rd.csv")).unwrap(), csv);
}

#[test]
fn eval_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = run(&["eval", "--in", s(&empty), "--out", s(&dir.path().join("r"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no images"), "{}", stderr(&o));
}
