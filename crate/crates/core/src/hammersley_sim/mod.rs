//! Finite-window Hammersley process: initial data, exact evolution through
//! the variational coupling on a shared Poisson field, and an event-driven
//! jump simulation used as an independent oracle.
//!
//! Positions are microscopic; times passed in are macroscopic and are scaled
//! by `n` internally.

mod direct;
mod sweep;

pub use direct::{evolve_direct, evolve_direct_logged, JumpEvent};
pub use sweep::{
    evolve_variational, evolve_variational_brute, tagged_trajectory, tagged_trajectory_with_argmins,
    EvolveOptions,
};

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{invalid, Error, Result};
use crate::macro_solver::MacroSolution;
use crate::poisson_field::{FieldStream, Region};
use crate::rng::rng_from_seed;

/// Label range `[i_min, i_max]` at scale `n`. Labels in
/// `[i_min, i_min + guard]` form the left guard band: no checked label may be
/// minimized from there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub n: u64,
    pub i_min: i64,
    pub i_max: i64,
    pub guard: i64,
}

/// Default distance, in macroscopic units, between the leftmost expected
/// minimizer and the guard band.
pub const DEFAULT_MARGIN: f64 = 0.5;

impl WindowSpec {
    pub fn new(n: u64, i_min: i64, i_max: i64, guard: i64) -> Result<Self> {
        if n == 0 {
            return invalid("scale n must be at least 1");
        }
        if guard < 0 {
            return invalid(format!("guard must be nonnegative, got {guard}"));
        }
        if i_min + guard >= i_max {
            return invalid(format!("window [{i_min}, {i_max}] leaves no room past guard {guard}"));
        }
        Ok(Self { n, i_min, i_max, guard })
    }

    /// Window for evaluating labels `[n x]` at the macroscopic points
    /// `queries`: the leftmost minimizer `y⁻` sits `margin` plus the guard band
    /// inside the window.
    pub fn for_queries(
        sol: &MacroSolution,
        n: u64,
        queries: &[(f64, f64)],
        guard: i64,
        margin: f64,
    ) -> Result<Self> {
        if queries.is_empty() {
            return invalid("no query points");
        }
        if !(margin >= 0.0) {
            return invalid(format!("margin must be nonnegative, got {margin}"));
        }
        let nf = n as f64;
        let mut y_left = f64::INFINITY;
        let mut k_max = i64::MIN;
        for &(x, t) in queries {
            let (ym, _) = sol.y_pm(x, t)?;
            y_left = y_left.min(ym);
            k_max = k_max.max(label_of(n, x));
        }
        let i_min = (nf * (y_left - margin)).floor() as i64 - guard;
        Self::new(n, i_min, k_max, guard)
    }

    pub fn len(&self) -> usize {
        (self.i_max - self.i_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, label: i64) -> bool {
        self.i_min <= label && label <= self.i_max
    }

    /// Last label of the guard band.
    pub fn guard_end(&self) -> i64 {
        self.i_min + self.guard
    }
}

/// Lazily sampled unit-rate field covering the evolution of `state0` over
/// macroscopic time `t`. Particles only move left, so the field starts at the
/// leftmost particle; `reach` extends it past the last present one, which
/// absent labels need.
pub fn covering_field(state0: &ParticleState, t: f64, reach: f64, seed: u64) -> Result<FieldStream> {
    if !(t > 0.0) || !(reach >= 0.0) {
        return invalid(format!("need t > 0 and reach >= 0, got {t} and {reach}"));
    }
    let z = state0.positions();
    let region = Region::new(z[0] - 1.0, z[z.len() - 1] + 1.0 + reach, 0.0, state0.n() as f64 * t)?;
    FieldStream::new(seed, region, 1.0)
}

/// `[n x]`.
pub fn label_of(n: u64, x: f64) -> i64 {
    (n as f64 * x).floor() as i64
}

/// Particle positions for labels `i_min ..= i_max` at macroscopic `time`.
/// Labels past the stored positions are absent (infinitely far right).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub window: WindowSpec,
    pub time: f64,
    positions: Vec<f64>,
    argmins: BTreeMap<i64, i64>,
}

impl ParticleState {
    /// State from explicit positions, the first at `window.i_min`. Fewer
    /// positions than labels marks the rest absent.
    pub fn from_positions(window: WindowSpec, time: f64, positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.len() > window.len() {
            return invalid(format!(
                "{} positions for a window of {} labels",
                positions.len(),
                window.len()
            ));
        }
        if positions.iter().any(|z| !z.is_finite()) {
            return invalid("positions must be finite");
        }
        if positions.windows(2).any(|w| w[0] > w[1]) {
            return invalid("positions must be nondecreasing in the label");
        }
        if !(time >= 0.0) {
            return invalid(format!("time must be nonnegative, got {time}"));
        }
        Ok(Self {
            window,
            time,
            positions,
            argmins: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> u64 {
        self.window.n
    }

    pub fn i_min(&self) -> i64 {
        self.window.i_min
    }

    /// Last present label.
    pub fn last_present(&self) -> i64 {
        self.window.i_min + self.positions.len() as i64 - 1
    }

    pub fn all_present(&self) -> bool {
        self.positions.len() == self.window.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// `z_i`, or `None` for labels outside the window or absent.
    pub fn position(&self, label: i64) -> Option<f64> {
        if label < self.window.i_min {
            return None;
        }
        self.positions.get((label - self.window.i_min) as usize).copied()
    }

    /// Smallest minimizing source label, where it was computed.
    pub fn argmin(&self, label: i64) -> Option<i64> {
        self.argmins.get(&label).copied()
    }

    pub fn argmins(&self) -> &BTreeMap<i64, i64> {
        &self.argmins
    }

    /// `η_i = z_i - z_{i-1}` for present `i > i_min`, in label order.
    pub fn sticks(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Rows `replica,label,t,z` for every present label.
    pub fn write_trajectory_rows<W: Write>(&self, mut w: W, replica: u64) -> std::io::Result<()> {
        for (j, z) in self.positions.iter().enumerate() {
            writeln!(w, "{replica},{},{},{}", self.window.i_min + j as i64, self.time, z)?;
        }
        Ok(())
    }
}

/// What to do with a stick whose mean is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroMeanPolicy {
    /// Refuse: an exponential with mean zero is degenerate.
    #[default]
    Reject,
    /// Use the point mass at zero, the limit of exponentials with vanishing
    /// mean. Needed for profiles with empty regions.
    PointMass,
}

// position anchor: label 0 at 0, otherwise i_min at n u0(i_min/n)
fn anchor(sol: &MacroSolution, w: &WindowSpec) -> (i64, f64) {
    if w.contains(0) {
        (0, 0.0)
    } else {
        (w.i_min, w.n as f64 * sol.profile.u0(w.i_min as f64 / w.n as f64))
    }
}

/// Independent exponential sticks with means `n (u0(i/n) - u0((i-1)/n))`.
pub fn init_local_equilibrium(sol: &MacroSolution, window: WindowSpec, seed: u64) -> Result<ParticleState> {
    init_local_equilibrium_with(sol, window, seed, ZeroMeanPolicy::Reject)
}

pub fn init_local_equilibrium_with(
    sol: &MacroSolution,
    window: WindowSpec,
    seed: u64,
    policy: ZeroMeanPolicy,
) -> Result<ParticleState> {
    let n = window.n as f64;
    let p = &sol.profile;
    let mut rng = rng_from_seed(seed);
    // sticks for labels i_min+1 ..= i_max, drawn in label order
    let mut sticks = Vec::with_capacity(window.len() - 1);
    let mut u_prev = p.u0(window.i_min as f64 / n);
    for i in window.i_min + 1..=window.i_max {
        let u = p.u0(i as f64 / n);
        let mean = n * (u - u_prev);
        u_prev = u;
        if mean > 0.0 {
            let e: f64 = rng.sample(Exp1);
            sticks.push(mean * e);
        } else if policy == ZeroMeanPolicy::PointMass {
            sticks.push(0.0);
        } else {
            return Err(Error::InvalidArgument(format!("stick {i} has zero mean")));
        }
    }
    let (a_label, a_pos) = anchor(sol, &window);
    let mut z = vec![0.0; window.len()];
    let ia = (a_label - window.i_min) as usize;
    z[ia] = a_pos;
    for j in ia + 1..z.len() {
        z[j] = z[j - 1] + sticks[j - 1];
    }
    for j in (0..ia).rev() {
        z[j] = z[j + 1] - sticks[j];
    }
    ParticleState::from_positions(window, 0.0, z)
}

/// `z_i(0) = n u0(i/n)` with no randomness.
pub fn init_deterministic(sol: &MacroSolution, window: WindowSpec) -> Result<ParticleState> {
    let n = window.n as f64;
    let z = (window.i_min..=window.i_max)
        .map(|i| n * sol.profile.u0(i as f64 / n))
        .collect();
    ParticleState::from_positions(window, 0.0, z)
}

/// Step data: labels `i <= 0` at the origin, labels `i > 0` absent.
pub fn init_bdj_step(window: WindowSpec) -> Result<ParticleState> {
    if window.i_min > 0 {
        return invalid("step data needs label 0 in the window");
    }
    let present = (0 - window.i_min + 1) as usize;
    ParticleState::from_positions(window, 0.0, vec![0.0; present.min(window.len())])
}

#[cfg(test)]
mod tests;
