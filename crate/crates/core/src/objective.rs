//! Per-sample objectives of the three training sub-problems.
//!
//! Each function runs one forward/backward pass for a single patch and
//! returns the loss breakdown plus gradients for the network being trained.
//! Batching and the optimizer step belong to the caller.

use alloc::vec::Vec;

use crate::arch::ResolutionMode;
use crate::config::LossWeights;
use crate::losses::{l1_content_grad, l1_gradient_grad, ssim_loss_grad, LossValue, SsimParams};
use crate::nn::{Grads, Network, Real, Tensor};
use crate::resample::{upsample2_adjoint, upsample2_plane};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SampleGrad<T> {
    pub loss: LossValue,
    pub grads: Grads<T>,
}

fn ensure_plane_match<T>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if (a.channels, a.height, a.width) != (b.channels, b.height, b.width) {
        return Err(Error::DimensionMismatch {
            left_h: a.height,
            left_w: a.width,
            right_h: b.height,
            right_w: b.width,
        });
    }
    Ok(())
}

/// `λc·L1(pred, target) + λg·L1∇(pred, target)` and its gradient w.r.t. `pred`.
pub fn reconstruction_loss<T: Real>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    w: &LossWeights,
) -> Result<(LossValue, Tensor<T>)> {
    ensure_plane_match(pred, target)?;
    let (content, gc) = l1_content_grad(&pred.data, &target.data);
    let (gradient, gg) = l1_gradient_grad(&pred.data, &target.data, pred.height, pred.width);
    let (wc, wg) = (
        T::from(w.content).unwrap_or_else(T::zero),
        T::from(w.gradient).unwrap_or_else(T::zero),
    );
    let grad: Vec<T> = gc.iter().zip(&gg).map(|(&a, &b)| wc * a + wg * b).collect();
    let loss = LossValue {
        total: w.content * content + w.gradient * gradient,
        content,
        gradient,
        ssim: 0.0,
    };
    Ok((loss, Tensor::from_plane(pred.height, pred.width, grad)))
}

/// PPNN sub-problem: `h(Z, γ)` against the ground truth `X`.
pub fn ppnn_sample<T: Real>(
    ppnn: &Network<T>,
    z: &Tensor<T>,
    x: &Tensor<T>,
    w: &LossWeights,
) -> Result<SampleGrad<T>> {
    let tape = ppnn.forward_tape(z)?;
    let (loss, g) = reconstruction_loss(tape.output(), x, w)?;
    let (grads, _) = ppnn.backward(&tape, g, true, false);
    Ok(SampleGrad {
        loss,
        grads: grads.expect("requested"),
    })
}

/// VCNN sub-problem: `v(Y, θ)` against the materialized PPNN output `Ĩ`.
pub fn vcnn_sample<T: Real>(
    vcnn: &Network<T>,
    y: &Tensor<T>,
    target: &Tensor<T>,
    w: &LossWeights,
) -> Result<SampleGrad<T>> {
    // identical objective shape; only the pairing of input and target differs
    ppnn_sample(vcnn, y, target, w)
}

/// Clamps the FDNN output into the codec-legal range.
pub fn clamp_representation<T: Real>(raw: &Tensor<T>) -> Tensor<T> {
    let mut y = raw.clone();
    y.data.iter_mut().for_each(|v| *v = v.max(T::zero()).min(T::one()));
    y
}

/// FDNN sub-problem with a frozen VCNN standing in for codec + PPNN:
/// `λc·L1(X, v(Y)) + λg·L1∇(X, v(Y)) + λs·SSIM(s(Y), X)` with `Y = clamp(f(X, α))`.
/// The clamp passes gradients inside `[0, 1]` and blocks them outside.
pub fn fdnn_sample<T: Real>(
    fdnn: &Network<T>,
    vcnn: &Network<T>,
    x: &Tensor<T>,
    mode: ResolutionMode,
    w: &LossWeights,
    ssim: &SsimParams,
) -> Result<SampleGrad<T>> {
    let tape_f = fdnn.forward_tape(x)?;
    let raw = tape_f.output();
    let y = clamp_representation(raw);
    let tape_v = vcnn.forward_tape(&y)?;
    let (recon, g_pred) = reconstruction_loss(tape_v.output(), x, w)?;
    let (_, g_y) = vcnn.backward(&tape_v, g_pred, false, true);
    let mut g_y = g_y.expect("requested");

    let (yh, yw) = (y.height, y.width);
    let (ssim_value, g_ssim) = match mode {
        ResolutionMode::High => ssim_loss_grad(&y.data, &x.data, yh, yw, ssim),
        ResolutionMode::Low => {
            let up = upsample2_plane(&y.data, yh, yw);
            let (v, g_up) = ssim_loss_grad(&up, &x.data, 2 * yh, 2 * yw, ssim);
            (v, upsample2_adjoint(&g_up, yh, yw))
        }
    };
    let ws = T::from(w.ssim).unwrap_or_else(T::zero);
    for ((g, &gs), &r) in g_y.data.iter_mut().zip(&g_ssim).zip(&raw.data) {
        *g = if r < T::zero() || r > T::one() {
            T::zero()
        } else {
            *g + ws * gs
        };
    }
    let (grads, _) = fdnn.backward(&tape_f, g_y, true, false);
    let loss = LossValue {
        total: recon.total + w.ssim * ssim_value,
        ssim: ssim_value,
        ..recon
    };
    Ok(SampleGrad {
        loss,
        grads: grads.expect("requested"),
    })
}

/// Loss of `net(input)` against `target` without gradients.
pub fn reconstruction_eval<T: Real>(
    net: &Network<T>,
    input: &Tensor<T>,
    target: &Tensor<T>,
    w: &LossWeights,
) -> Result<LossValue> {
    let out = net.forward(input)?;
    Ok(reconstruction_loss(&out, target, w)?.0)
}
