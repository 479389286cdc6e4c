//! Staged learning-rate decay: full rate for the first 3/5 of the steps,
//! half until 4/5, a quarter afterwards.

/// Initial Adam learning rate of all three networks.
pub const INITIAL_LR: f64 = 1e-4;

/// Learning rate at `step` of `total` for a given initial rate.
pub fn lr_at(initial: f64, step: u64, total: u64) -> f64 {
    // integer comparisons keep the plateau boundaries exact
    let (s, t) = (u128::from(step) * 5, u128::from(total));
    if s < 3 * t {
        initial
    } else if s < 4 * t {
        initial * 0.5
    } else {
        initial * 0.25
    }
}

pub fn lr_schedule(step: u64, total: u64) -> f64 {
    lr_at(INITIAL_LR, step, total)
}
