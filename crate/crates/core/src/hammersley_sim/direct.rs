//! Event-driven simulation: particle `i` jumps at rate `η_i` to a uniform
//! point of `(z_{i-1}, z_i)`; the leftmost particle is frozen.
//!
//! The total rate is `z_max - z_min`, and a uniform point of that span
//! selects both the jumping particle (whose gap contains it) and its landing
//! spot.

use rand::Rng;
use rand_distr::{Exp1, Open01};

use super::ParticleState;
use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

/// One jump, at microscopic time `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub label: i64,
    pub from: f64,
    pub to: f64,
}

/// Runs the jump process for macroscopic time `t` (microscopic `n t`).
pub fn evolve_direct(state0: &ParticleState, t: f64, seed: u64) -> Result<ParticleState> {
    run(state0, t, seed, |_| {})
}

/// As `evolve_direct`, also returning every jump.
pub fn evolve_direct_logged(state0: &ParticleState, t: f64, seed: u64) -> Result<(ParticleState, Vec<JumpEvent>)> {
    let mut log = Vec::new();
    let s = run(state0, t, seed, |e| log.push(e))?;
    Ok((s, log))
}

fn run(state0: &ParticleState, t: f64, seed: u64, mut record: impl FnMut(JumpEvent)) -> Result<ParticleState> {
    if !state0.all_present() {
        return invalid("direct simulation needs every label present");
    }
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be finite and nonnegative, got {t}"));
    }
    let horizon = state0.n() as f64 * t;
    let mut z = state0.positions().to_vec();
    let mut rng = rng_from_seed(seed);
    let mut now = 0.0;
    let last = z.len() - 1;
    loop {
        let span = z[last] - z[0];
        if !(span > 0.0) {
            break;
        }
        let e: f64 = rng.sample(Exp1);
        now += e / span;
        if now > horizon {
            break;
        }
        let u: f64 = rng.sample(Open01);
        let target = z[0] + span * u;
        // the particle whose gap (z_{j-1}, z_j] holds the target
        let j = z.partition_point(|&p| p < target);
        if j == 0 || j > last || target >= z[j] {
            // rounding put the target on a particle; nothing moves
            continue;
        }
        record(JumpEvent {
            time: now,
            label: state0.i_min() + j as i64,
            from: z[j],
            to: target,
        });
        z[j] = target;
    }
    ParticleState::from_positions(state0.window, state0.time + t, z)
}
