//! Diffusive fluctuation fields of the particle system and samples of their
//! Brownian limits.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::hammersley_sim::{evolve_variational, label_of, EvolveOptions, ParticleState};
use crate::macro_solver::MacroSolution;
use crate::poisson_field::PointSource;
use crate::rng::rng_from_seed;
use crate::stats_harness::normal_cdf;

/// `ζ_n(x,t) = n^{-1/2} (z_{[nx]}(nt) - n u(x,t))`.
pub fn zeta_n(state_t: &ParticleState, sol: &MacroSolution, x: f64, t: f64) -> Result<f64> {
    if state_t.time != t {
        return invalid(format!("state is at time {}, not {t}", state_t.time));
    }
    let n = state_t.n();
    let k = label_of(n, x);
    let z = state_t
        .position(k)
        .ok_or_else(|| Error::InvalidArgument(format!("label {k} outside the window or absent")))?;
    let nf = n as f64;
    Ok((z - nf * sol.u_value(x, t)?) / nf.sqrt())
}

/// `ζ_n` on a space-time grid for one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSample {
    pub n: u64,
    pub grid: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    /// `i_n(x,t)/n` where computed.
    pub argmins: Vec<Option<f64>>,
}

/// Evolves `state0` once per distinct grid time on the shared `field` and
/// evaluates `ζ_n` at every grid point. Every grid label is guard-checked.
pub fn sample_fluctuations<F: PointSource>(
    state0: &ParticleState,
    field: &F,
    sol: &MacroSolution,
    grid: &[(f64, f64)],
    argmins: bool,
) -> Result<FluctuationSample> {
    let n = state0.n();
    let mut by_time: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (j, &(_, t)) in grid.iter().enumerate() {
        if !(t >= 0.0) {
            return invalid(format!("grid time {t} is negative"));
        }
        by_time.entry(t.to_bits()).or_default().push(j);
    }
    let mut values = vec![0.0; grid.len()];
    let mut mins = vec![None; grid.len()];
    for (bits, idx) in by_time {
        let t = f64::from_bits(bits);
        if t == 0.0 {
            for &j in &idx {
                values[j] = zeta_n(state0, sol, grid[j].0, 0.0)?;
                if argmins {
                    mins[j] = Some(label_of(n, grid[j].0) as f64 / n as f64);
                }
            }
            continue;
        }
        let opts = EvolveOptions {
            targets: idx.iter().map(|&j| label_of(n, grid[j].0)).collect(),
            argmins,
        };
        let state = evolve_variational(state0, field, t, &opts)?;
        for &j in &idx {
            values[j] = zeta_n(&state, sol, grid[j].0, t)?;
            mins[j] = state.argmin(label_of(n, grid[j].0)).map(|i| i as f64 / n as f64);
        }
    }
    Ok(FluctuationSample {
        n,
        grid: grid.to_vec(),
        values,
        argmins: mins,
    })
}

// Brownian motion on [0, ∞) sampled lazily: new times beyond the last one
// extend the path, times in between are filled by bridge sampling.
#[derive(Debug, Clone)]
struct HalfPath {
    times: Vec<f64>,
    values: Vec<f64>,
    rng: ChaCha8Rng,
}

impl HalfPath {
    fn new(seed: u64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![0.0],
            rng: rng_from_seed(seed),
        }
    }

    fn value(&mut self, s: f64) -> f64 {
        let pos = self.times.partition_point(|&u| u < s);
        if pos < self.times.len() && self.times[pos] == s {
            return self.values[pos];
        }
        let z: f64 = self.rng.sample(StandardNormal);
        let v = if pos == self.times.len() {
            let (t0, v0) = (self.times[pos - 1], self.values[pos - 1]);
            v0 + z * (s - t0).sqrt()
        } else {
            let (t0, v0) = (self.times[pos - 1], self.values[pos - 1]);
            let (t1, v1) = (self.times[pos], self.values[pos]);
            let w = (s - t0) / (t1 - t0);
            v0 + w * (v1 - v0) + z * ((s - t0) * (t1 - s) / (t1 - t0)).sqrt()
        };
        self.times.insert(pos, s);
        self.values.insert(pos, v);
        v
    }
}

/// Two-sided standard Brownian motion with `B(0) = 0`, sampled on demand.
/// The half-lines use independent streams; values are reproducible for a
/// fixed seed and query order.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    seed: u64,
    right: HalfPath,
    left: HalfPath,
}

impl BrownianPath {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            right: HalfPath::new(crate::rng::stream_seed(seed, 0, crate::rng::Purpose::Brownian)),
            left: HalfPath::new(crate::rng::stream_seed(seed, 1, crate::rng::Purpose::Brownian)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn value(&mut self, s: f64) -> f64 {
        if s >= 0.0 {
            self.right.value(s)
        } else {
            self.left.value(-s)
        }
    }

    /// Values at `times`, sampled in ascending distance from 0 on each side.
    pub fn values(&mut self, times: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].abs().total_cmp(&times[b].abs()).then(times[a].total_cmp(&times[b])));
        let mut out = vec![0.0; times.len()];
        for j in order {
            out[j] = self.value(times[j]);
        }
        out
    }

    /// All sampled `(time, value)` pairs in increasing time.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .left
            .times
            .iter()
            .zip(&self.left.values)
            .skip(1)
            .map(|(&t, &v)| (-t, v))
            .rev()
            .collect();
        out.extend(self.right.times.iter().copied().zip(self.right.values.iter().copied()));
        out
    }
}

/// One sample of the limit field `ζ(x,t) = min_{y ∈ I(x,t)} B(σ(y))`.
#[derive(Debug, Clone)]
pub struct LimitSample {
    pub grid: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    /// `B` on the clock scale `σ(y) = ∫_0^y ρ0²`.
    pub path: BrownianPath,
}

/// Samples one Brownian path at the clock images of every grid point's
/// minimizers and evaluates `ζ` on the grid.
pub fn sample_limit(sol: &MacroSolution, grid: &[(f64, f64)], seed: u64) -> Result<LimitSample> {
    let mut sets = Vec::with_capacity(grid.len());
    let mut clocks = Vec::new();
    for &(x, t) in grid {
        let members: Vec<f64> = sol.minimizers(x, t)?.members.iter().map(|&y| sol.profile.clock(y)).collect();
        clocks.extend_from_slice(&members);
        sets.push(members);
    }
    let mut path = BrownianPath::new(seed);
    path.values(&clocks);
    let values = sets
        .iter()
        .map(|m| m.iter().map(|&c| path.value(c)).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(LimitSample {
        grid: grid.to_vec(),
        values,
        path,
    })
}

/// `ζ̄(x,t) = ½ (ζ0(y⁻) + ζ0(y⁺))`, the transport-equation version.
pub fn zeta_bar(limit: &mut LimitSample, sol: &MacroSolution, x: f64, t: f64) -> Result<f64> {
    let (ym, yp) = sol.y_pm(x, t)?;
    let a = limit.path.value(sol.profile.clock(ym));
    let b = limit.path.value(sol.profile.clock(yp));
    Ok(0.5 * (a + b))
}

/// A compactly supported function of space with its derivative.
pub trait SpaceTest {
    fn value(&self, x: f64) -> f64;
    fn deriv(&self, x: f64) -> f64;
    fn support(&self) -> (f64, f64);
}

/// Smooth bump `exp(1 - 1/(1-u²))`, `u = (x - c)/w`, times `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

impl SpaceTest for Bump {
    fn value(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.half_width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            self.height * (1.0 - 1.0 / (1.0 - u * u)).exp()
        }
    }
    fn deriv(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.half_width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - u * u;
            self.value(x) * (-2.0 * u / (q * q)) / self.half_width
        }
    }
    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// Piecewise-linear tent of the given height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tent {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

impl SpaceTest for Tent {
    fn value(&self, x: f64) -> f64 {
        let u = (x - self.center).abs() / self.half_width;
        self.height * (1.0 - u).max(0.0)
    }
    fn deriv(&self, x: f64) -> f64 {
        let d = x - self.center;
        if d.abs() >= self.half_width || d == 0.0 {
            0.0
        } else {
            -self.height * d.signum() / self.half_width
        }
    }
    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// `ξ_n(t,φ) = n^{-1/2} Σ_i φ(i/n) (η_i(nt) - ρⁿ_i(t))`.
pub fn xi_n(state_t: &ParticleState, sol: &MacroSolution, t: f64, phi: &dyn SpaceTest) -> Result<f64> {
    if state_t.time != t {
        return invalid(format!("state is at time {}, not {t}", state_t.time));
    }
    let n = state_t.n();
    let nf = n as f64;
    let (lo, hi) = phi.support();
    let (i_lo, i_hi) = ((nf * lo).floor() as i64, (nf * hi).ceil() as i64);
    if state_t.position(i_lo - 1).is_none() || state_t.position(i_hi).is_none() {
        return invalid(format!("test function support [{lo}, {hi}] escapes the window"));
    }
    let mut sum = 0.0;
    let mut u_prev = sol.u_value((i_lo - 1) as f64 / nf, t)?;
    for i in i_lo..=i_hi {
        let u = sol.u_value(i as f64 / nf, t)?;
        let eta = state_t.position(i).unwrap() - state_t.position(i - 1).unwrap();
        sum += phi.value(i as f64 / nf) * (eta - nf * (u - u_prev));
        u_prev = u;
    }
    Ok(sum / nf.sqrt())
}

/// `ξ(t,φ) = -∫ φ′(x) ζ(x,t) dx` by the trapezoid rule on `points` nodes,
/// with `ζ` read off the sample's path at the minimizers `y⁻(x,t)`.
pub fn xi_limit(limit: &mut LimitSample, sol: &MacroSolution, t: f64, phi: &dyn SpaceTest, points: usize) -> Result<f64> {
    if points < 2 {
        return invalid("quadrature needs at least two nodes");
    }
    let (lo, hi) = phi.support();
    let h = (hi - lo) / (points - 1) as f64;
    let mut clocks = Vec::with_capacity(points);
    let mut weights = Vec::with_capacity(points);
    for j in 0..points {
        let x = lo + h * j as f64;
        let d = phi.deriv(x);
        let w = if j == 0 || j == points - 1 { 0.5 } else { 1.0 };
        let (ym, _) = sol.y_pm(x, t)?;
        clocks.push(sol.profile.clock(ym));
        weights.push(w * h * d);
    }
    let b = limit.path.values(&clocks);
    Ok(-weights.iter().zip(&b).map(|(w, v)| w * v).sum::<f64>())
}

/// The `r`-interval outside which `φ(w(r,t))` vanishes.
fn preimage(sol: &MacroSolution, t: f64, phi: &dyn SpaceTest) -> Result<(f64, f64)> {
    let (lo, hi) = phi.support();
    if t == 0.0 {
        return Ok((lo, hi));
    }
    Ok((sol.y_pm(lo, t)?.0, sol.y_pm(hi, t)?.1))
}

// w(r, t) with w(r, 0) = r
fn char_at(sol: &MacroSolution, r: f64, t: f64) -> Result<f64> {
    sol.characteristic(r, t)
}

/// Nodes of a mesh of `[a, b]` with about `cells` cells, refined to contain
/// every profile breakpoint inside.
fn mesh_with_breaks(sol: &MacroSolution, a: f64, b: f64, cells: usize) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=cells).map(|j| a + (b - a) * j as f64 / cells as f64).collect();
    nodes.extend(sol.profile.breakpoints().iter().copied().filter(|&y| a < y && y < b));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    nodes
}

/// Weights `c_j` such that `ξ̃(t,φ) = Σ_j c_j (W(r_{j+1}) - W(r_j))` on the
/// returned nodes `r_j`; the Itô sum evaluates the integrand at left nodes.
pub fn xi_tilde_weights(sol: &MacroSolution, t: f64, phi: &dyn SpaceTest, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = preimage(sol, t, phi)?;
    let nodes = mesh_with_breaks(sol, a, b, cells.max(1));
    let mut weights = Vec::with_capacity(nodes.len() - 1);
    for w in nodes.windows(2) {
        let r = w[0];
        weights.push(phi.value(char_at(sol, r, t)?) * sol.profile.rho0(r));
    }
    Ok((nodes, weights))
}

/// `ξ̃(t,φ) = ∫ φ(w(r,t)) ρ0(r) dW(r)` as an Itô sum on a mesh of `cells`
/// cells refined at the profile breakpoints.
pub fn xi_tilde(t: f64, phi: &dyn SpaceTest, sol: &MacroSolution, w: &mut BrownianPath, cells: usize) -> Result<f64> {
    let (nodes, weights) = xi_tilde_weights(sol, t, phi, cells)?;
    let vals = w.values(&nodes);
    Ok(weights.iter().zip(vals.windows(2)).map(|(c, v)| c * (v[1] - v[0])).sum())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `E[ξ(s,ψ) ξ(t,φ)] = ∫ ψ(w(r,s)) φ(w(r,t)) ρ0(r)² dr` by adaptive Simpson
/// on panels split at the profile breakpoints.
pub fn corr_theoretical(sol: &MacroSolution, s: f64, t: f64, psi: &dyn SpaceTest, phi: &dyn SpaceTest) -> Result<f64> {
    let (a1, b1) = preimage(sol, s, psi)?;
    let (a2, b2) = preimage(sol, t, phi)?;
    let (a, b) = (a1.max(a2), b1.min(b2));
    if a >= b {
        return Ok(0.0);
    }
    let f = |r: f64| {
        let rho = sol.profile.rho0(r);
        let ws = char_at(sol, r, s).unwrap_or(f64::NAN);
        let wt = char_at(sol, r, t).unwrap_or(f64::NAN);
        psi.value(ws) * phi.value(wt) * rho * rho
    };
    let mut nodes = vec![a];
    nodes.extend(sol.profile.breakpoints().iter().copied().filter(|&y| a < y && y < b));
    nodes.push(b);
    let total: f64 = nodes.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-11)).sum();
    if total.is_nan() {
        return invalid("characteristic evaluation failed");
    }
    Ok(total)
}

/// CDF of `min{N(0,σ1²), N(0,σ2²)}` for independent components; a zero
/// variance is the point mass at 0.
pub fn min_gaussian_cdf(var1: f64, var2: f64) -> impl Fn(f64) -> f64 {
    let (s1, s2) = (var1.sqrt(), var2.sqrt());
    move |z| 1.0 - (1.0 - normal_cdf(z, s1)) * (1.0 - normal_cdf(z, s2))
}

/// Reference CDF of `ζ(x,t)` where it is known in closed form: a single
/// minimizer gives `N(0, |σ(y)|)`; two minimizers on opposite sides of 0
/// give the law of the minimum of independent Gaussians.
pub fn limit_cdf(sol: &MacroSolution, x: f64, t: f64) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    let members = sol.minimizers(x, t)?.members;
    let clocks: Vec<f64> = members.iter().map(|&y| sol.profile.clock(y)).collect();
    match clocks.as_slice() {
        [c] => {
            let sd = c.abs().sqrt();
            Ok(Box::new(move |z| normal_cdf(z, sd)))
        }
        [c1, c2] if c1 * c2 <= 0.0 => Ok(Box::new(min_gaussian_cdf(c1.abs(), c2.abs()))),
        _ => invalid(format!("no closed-form law at ({x}, {t})")),
    }
}
