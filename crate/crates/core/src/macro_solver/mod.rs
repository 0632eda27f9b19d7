//! Exact Hopf-Lax / Lax-Oleinik solution of `u_t + f(u_x) = 0`, `f(ρ) = ρ²`,
//! for piecewise-constant initial density.
//!
//! For piecewise-linear `u0` the objective `u0(y) + t g((x-y)/t)` is convex on
//! each piece, so its infimum over `y <= x` is attained at one clipped
//! stationary point per piece. Every query below enumerates that finite set.

mod characteristics;
mod general;
mod transport;

pub use general::GridHopfLax;
pub use transport::{theta, weak_residual, Averaging, BumpTest, Mesh, TestFunction};

use crate::error::{invalid, Result};

/// Flux `f(ρ) = ρ²`, its convex dual `g(x) = x²/4` and `b = g′`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FluxPair;

impl FluxPair {
    #[inline]
    pub fn f(&self, rho: f64) -> f64 {
        rho * rho
    }
    #[inline]
    pub fn f_prime(&self, rho: f64) -> f64 {
        2.0 * rho
    }
    #[inline]
    pub fn f_second(&self, _rho: f64) -> f64 {
        2.0
    }
    #[inline]
    pub fn g(&self, v: f64) -> f64 {
        0.25 * v * v
    }
    /// `b = g′`, the velocity-to-density map.
    #[inline]
    pub fn b(&self, v: f64) -> f64 {
        0.5 * v
    }
    #[inline]
    pub fn b_prime(&self, _v: f64) -> f64 {
        0.5
    }
}

/// Piecewise-constant `ρ0` with `u0(0) = 0`.
///
/// Piece `k` is `(y_k, y_{k+1})` with `y_0 = -∞` and `y_K = +∞`; `densities`
/// has one more entry than `breakpoints`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile {
    breakpoints: Vec<f64>,
    densities: Vec<f64>,
    // u0 at each breakpoint
    u_break: Vec<f64>,
    // clock sigma(y) = ∫_0^y ρ0² at each breakpoint
    clock_break: Vec<f64>,
}

impl InitialProfile {
    pub fn new(breakpoints: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if densities.len() != breakpoints.len() + 1 {
            return invalid(format!(
                "{} breakpoints need {} densities, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                densities.len()
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return invalid("breakpoints must be finite");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("breakpoints must be strictly increasing");
        }
        if densities.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return invalid("densities must be finite and nonnegative");
        }
        let u_break = Self::integrate_breaks(&breakpoints, &densities, |r| r);
        let clock_break = Self::integrate_breaks(&breakpoints, &densities, |r| r * r);
        Ok(Self {
            breakpoints,
            densities,
            u_break,
            clock_break,
        })
    }

    pub fn constant(rho: f64) -> Result<Self> {
        Self::new(vec![], vec![rho])
    }

    /// Density `left` on `(-∞, at)` and `right` on `(at, ∞)`.
    pub fn step(at: f64, left: f64, right: f64) -> Result<Self> {
        Self::new(vec![at], vec![left, right])
    }

    // signed integral of h(ρ0) from 0 to each breakpoint
    fn integrate_breaks(bp: &[f64], rho: &[f64], h: impl Fn(f64) -> f64) -> Vec<f64> {
        let k0 = bp.partition_point(|&b| b < 0.0);
        let mut out = vec![0.0; bp.len()];
        // right of zero
        let mut acc = 0.0;
        let mut prev = 0.0;
        for j in k0..bp.len() {
            acc += h(rho[j]) * (bp[j] - prev);
            out[j] = acc;
            prev = bp[j];
        }
        // left of zero
        let mut acc = 0.0;
        let mut prev = 0.0;
        for j in (0..k0).rev() {
            acc -= h(rho[j + 1]) * (prev - bp[j]);
            out[j] = acc;
            prev = bp[j];
        }
        out
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn pieces(&self) -> usize {
        self.densities.len()
    }

    pub fn rho_max(&self) -> f64 {
        self.densities.iter().copied().fold(0.0, f64::max)
    }

    /// Piece containing `y`; a breakpoint belongs to the piece on its right.
    pub fn piece_of(&self, y: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= y)
    }

    pub fn rho0(&self, y: f64) -> f64 {
        self.densities[self.piece_of(y)]
    }

    // value of a piecewise-linear primitive with per-breakpoint values `at`
    fn primitive(&self, at: &[f64], slope: impl Fn(f64) -> f64, k: usize, y: f64) -> f64 {
        let s = slope(self.densities[k]);
        if self.breakpoints.is_empty() {
            s * y
        } else if k == 0 {
            at[0] - s * (self.breakpoints[0] - y)
        } else {
            at[k - 1] + s * (y - self.breakpoints[k - 1])
        }
    }

    /// `u0(y) = ∫_0^y ρ0`, signed.
    pub fn u0(&self, y: f64) -> f64 {
        self.u0_on(self.piece_of(y), y)
    }

    // u0 using the linear formula of piece k; exact at its closed ends
    #[inline]
    fn u0_on(&self, k: usize, y: f64) -> f64 {
        self.primitive(&self.u_break, |r| r, k, y)
    }

    /// Clock `σ(y) = ∫_0^y ρ0²`, signed.
    pub fn clock(&self, y: f64) -> f64 {
        self.primitive(&self.clock_break, |r| r * r, self.piece_of(y), y)
    }

    /// Left and right ends of piece `k` (infinite at the outer pieces).
    pub fn piece_bounds(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { f64::NEG_INFINITY } else { self.breakpoints[k - 1] };
        let hi = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

/// Extreme and all near-optimal Hopf-Lax minimizers at one `(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerSet {
    pub y_minus: f64,
    pub y_plus: f64,
    pub members: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub y: f64,
    pub value: f64,
    /// `dy/dx` along this candidate family: 1 inside a piece, 0 at a breakpoint.
    pub slope: f64,
}

/// Candidate extremes used by the shock and transport code.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Extremes {
    pub value: f64,
    pub minus: Candidate,
    pub plus: Candidate,
}

pub const DEFAULT_TOL_MIN: f64 = 1e-10;
pub const DEFAULT_TOL_SHOCK: f64 = 1e-8;

/// Query object over an `InitialProfile`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroSolution {
    pub profile: InitialProfile,
    pub flux: FluxPair,
    /// Relative minimizer tolerance: values within `tol_min·(1+|u|)` tie.
    pub tol_min: f64,
    pub tol_shock: f64,
}

impl MacroSolution {
    pub fn new(profile: InitialProfile) -> Self {
        Self {
            profile,
            flux: FluxPair,
            tol_min: DEFAULT_TOL_MIN,
            tol_shock: DEFAULT_TOL_SHOCK,
        }
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return invalid(format!("time must be finite and nonnegative, got {t}"));
        }
        Ok(())
    }

    fn check_positive_time(t: f64) -> Result<()> {
        if !(t > 0.0) || !t.is_finite() {
            return invalid(format!("time must be finite and positive, got {t}"));
        }
        Ok(())
    }

    /// Visits the clipped stationary point of every piece reaching `x`.
    #[inline]
    fn for_each_candidate(&self, x: f64, t: f64, mut visit: impl FnMut(Candidate)) {
        let p = &self.profile;
        for k in 0..p.pieces() {
            let (lo, hi) = p.piece_bounds(k);
            if lo > x {
                break;
            }
            let hi = hi.min(x);
            let star = x - t * self.flux.f_prime(p.densities[k]);
            let (y, slope) = if star < lo {
                (lo, 0.0)
            } else if star > hi {
                // only reachable when the piece ends before x
                (hi, 0.0)
            } else {
                (star, 1.0)
            };
            let value = p.u0_on(k, y) + t * self.flux.g((x - y) / t);
            visit(Candidate { y, value, slope });
        }
    }

    pub(crate) fn extremes(&self, x: f64, t: f64) -> Extremes {
        self.extremes_tol(x, t, self.tol_min)
    }

    pub(crate) fn extremes_tol(&self, x: f64, t: f64, tol_rel: f64) -> Extremes {
        if t == 0.0 {
            let c = Candidate {
                y: x,
                value: self.profile.u0(x),
                slope: 1.0,
            };
            return Extremes {
                value: c.value,
                minus: c,
                plus: c,
            };
        }
        // at most one candidate per piece; small profiles fit on the stack
        let mut best = f64::INFINITY;
        self.for_each_candidate(x, t, |c| best = best.min(c.value));
        let tol = tol_rel * (1.0 + best.abs());
        let mut minus: Option<Candidate> = None;
        let mut plus: Option<Candidate> = None;
        self.for_each_candidate(x, t, |c| {
            if c.value <= best + tol {
                if minus.is_none_or(|m| c.y < m.y) {
                    minus = Some(c);
                }
                if plus.is_none_or(|m| c.y > m.y) {
                    plus = Some(c);
                }
            }
        });
        Extremes {
            value: best,
            minus: minus.expect("at least one candidate"),
            plus: plus.expect("at least one candidate"),
        }
    }

    /// `u(x,t) = inf_{y<=x} { u0(y) + t g((x-y)/t) }`.
    pub fn u_value(&self, x: f64, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.extremes(x, t).value)
    }

    /// The set `I(x,t)` up to `tol_min`; `I(x,0) = {x}`.
    pub fn minimizers(&self, x: f64, t: f64) -> Result<MinimizerSet> {
        Self::check_time(t)?;
        if t == 0.0 {
            return Ok(MinimizerSet {
                y_minus: x,
                y_plus: x,
                members: vec![x],
                value: self.profile.u0(x),
            });
        }
        let mut all = Vec::new();
        self.for_each_candidate(x, t, |c| all.push(c));
        let best = all.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
        let tol = self.tol_min * (1.0 + best.abs());
        let mut members: Vec<f64> = all.iter().filter(|c| c.value <= best + tol).map(|c| c.y).collect();
        members.sort_by(f64::total_cmp);
        members.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));
        Ok(MinimizerSet {
            y_minus: members[0],
            y_plus: *members.last().unwrap(),
            members,
            value: best,
        })
    }

    /// `(y⁻(x,t), y⁺(x,t))`.
    pub fn y_pm(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        Self::check_time(t)?;
        let e = self.extremes(x, t);
        Ok((e.minus.y, e.plus.y))
    }

    /// Lax-Oleinik densities `ρ± = b((x - y±)/t)`.
    pub fn rho_pm(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        Self::check_positive_time(t)?;
        let e = self.extremes(x, t);
        Ok((self.flux.b((x - e.minus.y) / t), self.flux.b((x - e.plus.y) / t)))
    }

    /// True iff `t > 0` and `y⁺ - y⁻ > tol_shock`.
    pub fn is_shock(&self, x: f64, t: f64) -> bool {
        if !(t > 0.0) {
            return false;
        }
        let e = self.extremes(x, t);
        e.plus.y - e.minus.y > self.tol_shock
    }

    /// `h(x,t)`: `f′(ρ)` off shocks, the Rankine-Hugoniot slope at shocks.
    pub fn shock_speed(&self, x: f64, t: f64) -> Result<f64> {
        let (rm, rp) = self.rho_pm(x, t)?;
        if self.is_shock(x, t) && rm != rp {
            Ok((self.flux.f(rp) - self.flux.f(rm)) / (rp - rm))
        } else {
            Ok(self.flux.f_prime(rp))
        }
    }

    /// `y±(x; s, t) = (s/t) x + (1 - s/t) y±(x, t)` for `0 < s < t`.
    pub fn intermediate_minimizer(&self, x: f64, t: f64, s: f64) -> Result<(f64, f64)> {
        Self::check_positive_time(t)?;
        if !(s > 0.0 && s < t) {
            return invalid(format!("intermediate time {s} must lie in (0, {t})"));
        }
        let (ym, yp) = self.y_pm(x, t)?;
        let r = s / t;
        Ok((r * x + (1.0 - r) * ym, r * x + (1.0 - r) * yp))
    }

    /// Iterated Hopf-Lax value `min_y { u(y,s) + (t-s) g((x-y)/(t-s)) }`.
    ///
    /// `u(·,s)` is the lower envelope of finitely many families: a line per
    /// piece (valid where its stationary point stays in the piece) and a
    /// parabola per breakpoint (valid right of it). Each family is minimized
    /// in closed form, independently of `u_value`.
    pub fn semigroup_value(&self, x: f64, s: f64, t: f64) -> Result<f64> {
        Self::check_positive_time(s)?;
        if !(t > s) {
            return invalid(format!("need s < t, got s={s}, t={t}"));
        }
        let p = &self.profile;
        let d = t - s;
        let obj = |fam: f64, y: f64| fam + d * self.flux.g((x - y) / d);
        let mut best = f64::INFINITY;
        for k in 0..p.pieces() {
            let r = p.densities[k];
            let (lo, hi) = p.piece_bounds(k);
            let a0 = p.u0_on(k, 0.0);
            // u(y,s) = a0 + r y - s r² for y - 2 s r in piece k
            let (vlo, vhi) = (lo + 2.0 * s * r, (hi + 2.0 * s * r).min(x));
            if vlo > vhi {
                continue;
            }
            let y = (x - 2.0 * d * r).clamp(vlo, vhi);
            best = best.min(obj(a0 + r * y - s * r * r, y));
        }
        for (j, &b) in p.breakpoints.iter().enumerate() {
            if b > x {
                break;
            }
            // u(y,s) = U_j + (y - b)²/(4s) for y >= b
            let y = ((s * x + d * b) / t).clamp(b, x);
            best = best.min(obj(p.u_break[j] + (y - b) * (y - b) / (4.0 * s), y));
        }
        Ok(best)
    }
}
