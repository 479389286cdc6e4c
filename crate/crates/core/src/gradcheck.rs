//! Finite-difference checks of the analytic loss gradients.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::losses::{l1_content_grad, l1_gradient_grad, ssim_loss_grad, SsimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Content,
    Gradient,
    Ssim,
}

impl LossTerm {
    pub const ALL: [LossTerm; 3] = [LossTerm::Content, LossTerm::Gradient, LossTerm::Ssim];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Content => "l1_content",
            LossTerm::Gradient => "l1_gradient",
            LossTerm::Ssim => "ssim_loss",
        }
    }

    /// Loss value and analytic gradient with respect to `pred`.
    pub fn eval(self, pred: &[f64], target: &[f64], h: usize, w: usize) -> (f64, Vec<f64>) {
        match self {
            LossTerm::Content => l1_content_grad(pred, target),
            LossTerm::Gradient => l1_gradient_grad(pred, target, h, w),
            LossTerm::Ssim => ssim_loss_grad(pred, target, h, w, &SsimParams::default()),
        }
    }
}

/// Magnitudes below this count as zero when forming relative errors, so an
/// exactly vanishing gradient is not judged against rounding noise.
pub const ZERO_FLOOR: f64 = 1e-8;

/// `|a − b| / max(|a|, |b|, ZERO_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ZERO_FLOOR)
}

/// Central difference of `f` along coordinate `i`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], i: usize, step: f64) -> f64 {
    let mut probe = x.to_vec();
    probe[i] = x[i] + step;
    let up = f(&probe);
    probe[i] = x[i] - step;
    let down = f(&probe);
    (up - down) / (2.0 * step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Coordinates actually compared.
    pub coordinates: usize,
    /// Coordinates passed over because an L1 kink lies within one step.
    pub skipped_kinks: usize,
    pub max_relative_error: f64,
    pub worst_index: usize,
}

/// True when the one-sided differences at `i` disagree, i.e. the function is
/// not smooth within `step` of `x` there.
fn near_kink(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], i: usize, step: f64) -> bool {
    let mut probe = x.to_vec();
    let mid = f(&probe);
    probe[i] = x[i] + step;
    let fwd = (f(&probe) - mid) / step;
    probe[i] = x[i] - step;
    let bwd = (mid - f(&probe)) / step;
    relative_error(fwd, bwd) > 0.1
}

/// Compares analytic and central-difference gradients of `term` at `coords`
/// random coordinates of a random `h × w` prediction/target pair.
///
/// The L1 terms are piecewise linear; a coordinate whose finite-difference
/// stencil straddles a kink is replaced by a fresh one, so `coords` smooth
/// coordinates are compared whenever the image has that many.
pub fn check_loss_gradient(term: LossTerm, h: usize, w: usize, coords: usize, step: f64, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = h * w;
    let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let target: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let (_, analytic) = term.eval(&pred, &target, h, w);
    let loss = |p: &[f64]| term.eval(p, &target, h, w).0;
    let mut report = GradCheck {
        coordinates: 0,
        skipped_kinks: 0,
        max_relative_error: 0.0,
        worst_index: 0,
    };
    for i in sample(&mut rng, n, n).into_iter() {
        if report.coordinates == coords {
            break;
        }
        if term != LossTerm::Ssim && near_kink(loss, &pred, i, step) {
            report.skipped_kinks += 1;
            continue;
        }
        let e = relative_error(analytic[i], central_difference(loss, &pred, i, step));
        report.coordinates += 1;
        if e > report.max_relative_error {
            report.max_relative_error = e;
            report.worst_index = i;
        }
    }
    report
}
