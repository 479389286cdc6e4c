//! The alternating three-sub-problem training loop.
//!
//! Each outer round regenerates the representation `Y` of every patch
//! (interpolation in the first round, the FDNN afterwards), pushes it through
//! the real codec to get `Z`, then trains PPNN on `(Z, X)`, VCNN on
//! `(Y, h(Z))`, and finally the FDNN through the frozen VCNN.

use std::fmt;
use std::io::Write;

use mixres_core::arch::{build_fdnn_width, build_ppnn_width, build_vcnn_width};
use mixres_core::checkpoint::ModelBundle;
use mixres_core::config::TrainConfig;
use mixres_core::losses::{LossValue, SsimParams};
use mixres_core::nn::{Grads, Network, Tensor};
use mixres_core::objective::{clamp_representation, fdnn_sample, ppnn_sample, vcnn_sample, SampleGrad};
use mixres_core::optim::Adam;
use mixres_core::resample::bootstrap_representation;
use mixres_core::schedule::lr_at;
use mixres_core::{quantize8, ImageGray};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Codec, CodecConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubProblem {
    Ppnn,
    Vcnn,
    Fdnn,
}

impl SubProblem {
    pub fn name(self) -> &'static str {
        match self {
            SubProblem::Ppnn => "ppnn",
            SubProblem::Vcnn => "vcnn",
            SubProblem::Fdnn => "fdnn",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SubProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One optimizer step. Displays as the training-log line
/// `outer,subproblem,step,lr,loss_total,loss_content,loss_gradient,loss_ssim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub outer: u32,
    pub subproblem: SubProblem,
    pub step: u64,
    pub lr: f64,
    pub loss: LossValue,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{}",
            self.outer,
            self.subproblem,
            self.step,
            self.lr,
            self.loss.total,
            self.loss.content,
            self.loss.gradient,
            self.loss.ssim
        )
    }
}

/// Per-round training data, materialized once per outer iteration.
struct Round {
    xs: Vec<Tensor<f32>>,
    ys: Vec<Tensor<f32>>,
    zs: Vec<Tensor<f32>>,
    /// PPNN outputs `Ĩ`, fixed targets for the VCNN.
    targets: Vec<Tensor<f32>>,
    done: Option<SubProblem>,
}

pub struct Trainer<'a> {
    cfg: TrainConfig,
    codec: &'a dyn Codec,
    ssim: SsimParams,
    fdnn: Network<f32>,
    ppnn: Network<f32>,
    vcnn: Network<f32>,
    opt_fdnn: Adam<f32>,
    opt_ppnn: Adam<f32>,
    opt_vcnn: Adam<f32>,
    rng: ChaCha8Rng,
    steps: [u64; 3],
    outer: u32,
    round: Option<Round>,
    history: Vec<LogRecord>,
    log: Option<Box<dyn Write + 'a>>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, codec: &'a dyn Codec) -> Result<Self> {
        cfg.validate()?;
        CodecConfig::new(cfg.quality_factor)?;
        let (mode, width) = (cfg.mode, cfg.width);
        let fdnn = Network::init(build_fdnn_width(mode, width), &mut stream(cfg.seed, 0));
        let ppnn = Network::init(build_ppnn_width(mode, width), &mut stream(cfg.seed, 1));
        let vcnn = Network::init(build_vcnn_width(mode, width), &mut stream(cfg.seed, 2));
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        Ok(Trainer {
            opt_fdnn: Adam::new(&fdnn, b1, b2),
            opt_ppnn: Adam::new(&ppnn, b1, b2),
            opt_vcnn: Adam::new(&vcnn, b1, b2),
            rng: stream(cfg.seed, 3),
            ssim: SsimParams::default(),
            steps: [0; 3],
            outer: 0,
            round: None,
            history: Vec::new(),
            log: None,
            fdnn,
            ppnn,
            vcnn,
            cfg,
            codec,
        })
    }

    /// Streams every [`LogRecord`] line to `sink` as it is produced.
    pub fn with_log(mut self, sink: impl Write + 'a) -> Self {
        self.log = Some(Box::new(sink));
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn fdnn(&self) -> &Network<f32> {
        &self.fdnn
    }

    pub fn ppnn(&self) -> &Network<f32> {
        &self.ppnn
    }

    pub fn vcnn(&self) -> &Network<f32> {
        &self.vcnn
    }

    pub fn history(&self) -> &[LogRecord] {
        &self.history
    }

    /// Outer rounds begun so far.
    pub fn outer_iteration(&self) -> u32 {
        self.outer
    }

    /// Optimizer steps taken by one sub-problem across all rounds.
    pub fn steps_taken(&self, sp: SubProblem) -> u64 {
        self.steps[sp.index()]
    }

    /// Current representation of `x`: interpolation during the first round,
    /// the clamped FDNN output afterwards.
    pub fn represent(&self, x: &ImageGray) -> Result<ImageGray> {
        if self.outer <= 1 {
            Ok(bootstrap_representation(x, self.cfg.mode)?)
        } else {
            let raw = self.fdnn.forward(&Tensor::from_image(x))?;
            Ok(clamp_representation(&raw).to_image())
        }
    }

    /// `Z`: the decoded codec round trip of `quantize8(y)`.
    pub fn compress(&self, y: &ImageGray) -> Result<ImageGray> {
        let cfg = CodecConfig::new(self.cfg.quality_factor)?;
        Ok(self.codec.roundtrip(&quantize8(y), cfg)?.decoded_unit())
    }

    /// Starts a new outer round: regenerates and re-compresses `Y` for every patch.
    pub fn begin_round(&mut self, patches: &[ImageGray]) -> Result<()> {
        if let Some(r) = &self.round {
            if r.done != Some(SubProblem::Fdnn) {
                return Err(Error::Order("a round must finish its FDNN step before the next begins"));
            }
        }
        if patches.is_empty() {
            return Err(mixres_core::Error::Validation("no training patches".into()).into());
        }
        for p in patches {
            p.ensure_pipeline_size()?;
        }
        self.outer += 1;
        let mut round = Round {
            xs: Vec::with_capacity(patches.len()),
            ys: Vec::with_capacity(patches.len()),
            zs: Vec::with_capacity(patches.len()),
            targets: Vec::new(),
            done: None,
        };
        for x in patches {
            let y = self.represent(x)?;
            let z = self.compress(&y)?;
            round.xs.push(Tensor::from_image(x));
            round.ys.push(Tensor::from_image(&y));
            round.zs.push(Tensor::from_image(&z));
        }
        self.round = Some(round);
        Ok(())
    }

    fn expect_stage(&self, before: Option<SubProblem>, msg: &'static str) -> Result<()> {
        match &self.round {
            Some(r) if r.done == before => Ok(()),
            _ => Err(Error::Order(msg)),
        }
    }

    /// PPNN sub-problem: updates `γ` only.
    pub fn train_ppnn(&mut self) -> Result<()> {
        self.expect_stage(None, "PPNN trains first in each round")?;
        let round = self.round.take().expect("checked");
        let res = self.run_steps(SubProblem::Ppnn, round.xs.len(), |t, i| {
            ppnn_sample(&t.ppnn, &round.zs[i], &round.xs[i], &t.cfg.weights)
        });
        self.round = Some(round);
        res?;
        self.round.as_mut().expect("restored").done = Some(SubProblem::Ppnn);
        Ok(())
    }

    /// VCNN sub-problem: learns `Y ↦ h(Z, γ)`, updates `θ` only.
    pub fn train_vcnn(&mut self) -> Result<()> {
        self.expect_stage(Some(SubProblem::Ppnn), "VCNN trains after PPNN")?;
        let mut round = self.round.take().expect("checked");
        let targets: Result<Vec<_>> = round
            .zs
            .iter()
            .map(|z| Ok(clamp_representation(&self.ppnn.forward(z)?)))
            .collect();
        round.targets = match targets {
            Ok(t) => t,
            Err(e) => {
                self.round = Some(round);
                return Err(e);
            }
        };
        let res = self.run_steps(SubProblem::Vcnn, round.xs.len(), |t, i| {
            vcnn_sample(&t.vcnn, &round.ys[i], &round.targets[i], &t.cfg.weights)
        });
        self.round = Some(round);
        res?;
        self.round.as_mut().expect("restored").done = Some(SubProblem::Vcnn);
        Ok(())
    }

    /// FDNN sub-problem through the frozen VCNN: updates `α` only.
    pub fn train_fdnn(&mut self) -> Result<()> {
        self.expect_stage(Some(SubProblem::Vcnn), "FDNN trains after VCNN")?;
        let round = self.round.take().expect("checked");
        let res = self.run_steps(SubProblem::Fdnn, round.xs.len(), |t, i| {
            fdnn_sample(&t.fdnn, &t.vcnn, &round.xs[i], t.cfg.mode, &t.cfg.weights, &t.ssim)
        });
        self.round = Some(round);
        res?;
        self.round.as_mut().expect("restored").done = Some(SubProblem::Fdnn);
        Ok(())
    }

    fn run_steps<F>(&mut self, sp: SubProblem, n: usize, mut sample: F) -> Result<()>
    where
        F: FnMut(&Self, usize) -> mixres_core::Result<SampleGrad<f32>>,
    {
        let per_round = match sp {
            SubProblem::Ppnn => self.cfg.ppnn_steps,
            SubProblem::Vcnn => self.cfg.vcnn_steps,
            SubProblem::Fdnn => self.cfg.fdnn_steps,
        };
        let total = per_round * u64::from(self.cfg.outer_iterations);
        for _ in 0..per_round {
            let step = self.steps[sp.index()];
            let lr = lr_at(self.cfg.learning_rate, step, total);
            let batch: Vec<usize> = (0..self.cfg.batch_size).map(|_| self.rng.gen_range(0..n)).collect();

            let spec = match sp {
                SubProblem::Ppnn => self.ppnn.spec(),
                SubProblem::Vcnn => self.vcnn.spec(),
                SubProblem::Fdnn => self.fdnn.spec(),
            };
            let mut grads = Grads::zeros_like(spec);
            let mut loss = LossValue::default();
            for &i in &batch {
                let s = sample(self, i)?;
                grads.add_assign(&s.grads);
                loss.total += s.loss.total;
                loss.content += s.loss.content;
                loss.gradient += s.loss.gradient;
                loss.ssim += s.loss.ssim;
            }
            let inv = 1.0 / batch.len() as f64;
            grads.scale(inv as f32);
            loss.total *= inv;
            loss.content *= inv;
            loss.gradient *= inv;
            loss.ssim *= inv;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite {
                    outer: self.outer,
                    subproblem: sp.name(),
                    step,
                    lr,
                });
            }
            match sp {
                SubProblem::Ppnn => self.opt_ppnn.step(&mut self.ppnn, &grads, lr),
                SubProblem::Vcnn => self.opt_vcnn.step(&mut self.vcnn, &grads, lr),
                SubProblem::Fdnn => self.opt_fdnn.step(&mut self.fdnn, &grads, lr),
            }
            self.steps[sp.index()] += 1;
            let rec = LogRecord {
                outer: self.outer,
                subproblem: sp,
                step,
                lr,
                loss,
            };
            if let Some(log) = self.log.as_mut() {
                writeln!(log, "{rec}").map_err(|e| Error::io("<training log>", e))?;
            }
            log::debug!("{rec}");
            self.history.push(rec);
        }
        if let Some(log) = self.log.as_mut() {
            log.flush().map_err(|e| Error::io("<training log>", e))?;
        }
        Ok(())
    }

    /// One full outer round: PPNN → VCNN → FDNN.
    pub fn run_round(&mut self, patches: &[ImageGray]) -> Result<()> {
        let outer = self.outer + 1;
        let wrap = |e: Error| Error::Round {
            outer,
            source: Box::new(e),
        };
        self.begin_round(patches).map_err(wrap)?;
        self.train_ppnn().map_err(wrap)?;
        self.train_vcnn().map_err(wrap)?;
        self.train_fdnn().map_err(wrap)?;
        log::info!(
            "round {outer} done: ppnn {:.5} vcnn {:.5} fdnn {:.5}",
            self.last_loss(SubProblem::Ppnn).unwrap_or(f64::NAN),
            self.last_loss(SubProblem::Vcnn).unwrap_or(f64::NAN),
            self.last_loss(SubProblem::Fdnn).unwrap_or(f64::NAN),
        );
        Ok(())
    }

    pub fn last_loss(&self, sp: SubProblem) -> Option<f64> {
        self.history.iter().rev().find(|r| r.subproblem == sp).map(|r| r.loss.total)
    }

    /// Runs every configured outer round and returns the trained bundle.
    pub fn alternate(&mut self, patches: &[ImageGray]) -> Result<ModelBundle> {
        for _ in 0..self.cfg.outer_iterations {
            self.run_round(patches)?;
        }
        Ok(self.bundle())
    }

    /// Snapshot of the current parameters. The VCNN rides along for audit.
    pub fn bundle(&self) -> ModelBundle {
        ModelBundle {
            mode: self.cfg.mode,
            quality_factor: self.cfg.quality_factor,
            step: self.steps.iter().sum(),
            fdnn: self.fdnn.clone(),
            ppnn: self.ppnn.clone(),
            vcnn: Some(self.vcnn.clone()),
        }
    }
}

/// Convenience wrapper: builds a trainer and runs [`Trainer::alternate`].
pub fn alternate(patches: &[ImageGray], cfg: TrainConfig, codec: &dyn Codec) -> Result<ModelBundle> {
    Trainer::new(cfg, codec)?.alternate(patches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Jpeg;
    use mixres_core::ResolutionMode;

    fn tiny_cfg(mode: ResolutionMode) -> TrainConfig {
        let mut cfg = TrainConfig::new(mode, 10);
        cfg.width = 4;
        cfg.patch_size = 16;
        cfg.batch_size = 2;
        cfg.outer_iterations = 1;
        cfg.ppnn_steps = 2;
        cfg.vcnn_steps = 2;
        cfg.fdnn_steps = 2;
        cfg.learning_rate = 1e-3;
        cfg
    }

    fn patches() -> Vec<ImageGray> {
        (0..3)
            .map(|k| {
                ImageGray::from_fn(16, 16, |r, c| {
                    (0.5 + 0.4 * ((r as f32 * 0.7 + k as f32).sin() * (c as f32 * 0.4).cos())).clamp(0.0, 1.0)
                })
                .unwrap()
            })
            .collect()
    }

    fn prints(t: &Trainer) -> [u64; 3] {
        [t.fdnn().fingerprint(), t.ppnn().fingerprint(), t.vcnn().fingerprint()]
    }

    #[test]
    fn each_subproblem_touches_only_its_network() {
        let codec = Jpeg;
        let mut t = Trainer::new(tiny_cfg(ResolutionMode::Low), &codec).unwrap();
        t.begin_round(&patches()).unwrap();
        let p0 = prints(&t);
        t.train_ppnn().unwrap();
        let p1 = prints(&t);
        assert_eq!((p1[0], p1[2]), (p0[0], p0[2]));
        assert_ne!(p1[1], p0[1]);
        t.train_vcnn().unwrap();
        let p2 = prints(&t);
        assert_eq!((p2[0], p2[1]), (p1[0], p1[1]));
        assert_ne!(p2[2], p1[2]);
        t.train_fdnn().unwrap();
        let p3 = prints(&t);
        assert_eq!((p3[1], p3[2]), (p2[1], p2[2]));
        assert_ne!(p3[0], p2[0]);
    }

    #[test]
    fn zero_steps_leave_parameters_alone() {
        let codec = Jpeg;
        let mut cfg = tiny_cfg(ResolutionMode::High);
        cfg.ppnn_steps = 0;
        let mut t = Trainer::new(cfg, &codec).unwrap();
        let before = t.ppnn().fingerprint();
        t.begin_round(&patches()).unwrap();
        t.train_ppnn().unwrap();
        assert_eq!(t.ppnn().fingerprint(), before);
        assert_eq!(t.steps_taken(SubProblem::Ppnn), 0);
    }

    #[test]
    fn order_is_enforced() {
        let codec = Jpeg;
        let mut t = Trainer::new(tiny_cfg(ResolutionMode::Low), &codec).unwrap();
        assert!(matches!(t.train_ppnn(), Err(Error::Order(_))));
        t.begin_round(&patches()).unwrap();
        assert!(matches!(t.train_vcnn(), Err(Error::Order(_))));
        assert!(matches!(t.train_fdnn(), Err(Error::Order(_))));
        t.train_ppnn().unwrap();
        assert!(matches!(t.train_ppnn(), Err(Error::Order(_))));
        assert!(matches!(t.begin_round(&patches()), Err(Error::Order(_))));
        t.train_vcnn().unwrap();
        t.train_fdnn().unwrap();
        t.begin_round(&patches()).unwrap();
        assert_eq!(t.outer_iteration(), 2);
    }

    #[test]
    fn one_outer_iteration_runs_three_stages_in_order() {
        let codec = Jpeg;
        let mut sink = Vec::new();
        let bundle = Trainer::new(tiny_cfg(ResolutionMode::Low), &codec)
            .unwrap()
            .with_log(&mut sink)
            .alternate(&patches())
            .unwrap();
        assert_eq!(bundle.step, 6);
        let text = String::from_utf8(sink).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        let stages: Vec<&str> = lines.iter().map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(stages, ["ppnn", "ppnn", "vcnn", "vcnn", "fdnn", "fdnn"]);
        assert!(lines.iter().all(|l| l.split(',').count() == 8));
        assert!(lines[0].starts_with("1,ppnn,0,0.001,"));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let codec = Jpeg;
        let run = || {
            let mut t = Trainer::new(tiny_cfg(ResolutionMode::Low), &codec).unwrap();
            t.alternate(&patches()).unwrap();
            t.history().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn second_round_uses_fdnn_representation() {
        let codec = Jpeg;
        let mut cfg = tiny_cfg(ResolutionMode::Low);
        cfg.outer_iterations = 2;
        let mut t = Trainer::new(cfg, &codec).unwrap();
        let x = &patches()[0];
        t.run_round(&patches()).unwrap();
        let learned = clamp_representation(&t.fdnn().forward(&Tensor::from_image(x)).unwrap()).to_image();
        assert_eq!(t.represent(x).unwrap(), bootstrap_representation(x, ResolutionMode::Low).unwrap());
        t.begin_round(&patches()).unwrap();
        assert_eq!(t.represent(x).unwrap(), learned);
    }

    #[test]
    fn errors_carry_the_round_index() {
        let codec = Jpeg;
        let mut t = Trainer::new(tiny_cfg(ResolutionMode::Low), &codec).unwrap();
        let odd = vec![ImageGray::constant(17, 17, 0.5).unwrap()];
        match t.run_round(&odd) {
            Err(Error::Round { outer: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
