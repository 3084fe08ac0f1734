//! Slice sampler for the example target f(x) ∝ exp(−x²/2) / (1 + x² + x⁴).
//!
//! The auxiliary variable u | x is uniform on (0, 1/(1 + x² + x⁴)), and
//! x | u is a standard normal restricted to {1 + x² + x⁴ ≤ 1/u} = [−b(u), b(u)].

use crate::distributions::{sample_truncated_normal, standard_normal};
use crate::mcmc::{ChainTrace, SeedInfo};
use crate::{Error, Result, RngStream};

#[inline]
fn slice_weight(x: f64) -> f64 {
    let x2 = x * x;
    1.0 + x2 + x2 * x2
}

/// Positive root b of 1 + b² + b⁴ = 1/u.
///
/// Evaluated as b² = 2(1 − u) / (√(u(4 − 3u)) + u), which is the textbook
/// root with the cancellation removed and never forms 1/u.
pub fn slice_truncation_bound(u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::invalid(format!("slice level must lie in (0, 1], got {u}")));
    }
    Ok(bound(u))
}

#[inline]
fn bound(u: f64) -> f64 {
    let b2 = 2.0 * (1.0 - u) / ((u * (4.0 - 3.0 * u)).sqrt() + u);
    let mut b = b2.sqrt();
    // Rounding may put b a hair outside the slice; pull it back in.
    while b > 0.0 && u * slice_weight(b) > 1.0 {
        b = b.next_down();
    }
    b
}

/// One sweep (u | x, then x | u); returns the new state and the auxiliary
/// level it was drawn under.
pub fn slice_gibbs_step_joint(x: f64, rng: &mut RngStream) -> (f64, f64) {
    let u = rng.next_open01() / slice_weight(x);
    if u == 0.0 {
        return (standard_normal(rng), u);
    }
    let b = bound(u);
    if b == 0.0 {
        return (0.0, u);
    }
    let next = sample_truncated_normal(rng, 0.0, 1.0, -b, b).unwrap_or(0.0);
    (next, u)
}

pub fn slice_gibbs_step(x: f64, rng: &mut RngStream) -> f64 {
    slice_gibbs_step_joint(x, rng).0
}

pub fn run_gibbs_chain(init: f64, iters: usize, burn_in: usize, rng: &mut RngStream) -> Result<ChainTrace> {
    if iters <= burn_in {
        return Err(Error::invalid(format!("iters ({iters}) must exceed burn_in ({burn_in})")));
    }
    if !init.is_finite() {
        return Err(Error::invalid(format!("initial state must be finite, got {init}")));
    }
    let seed_info = SeedInfo::of(rng);
    let mut x = init;
    let mut states = Vec::with_capacity(iters);
    for _ in 0..iters {
        x = slice_gibbs_step(x, rng);
        states.push(x);
    }
    Ok(ChainTrace { init, states, accepted: None, burn_in, seed_info })
}
