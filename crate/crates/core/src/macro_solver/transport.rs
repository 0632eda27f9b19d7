//! Linear transport `v_t + f′(ρ) v_x = 0` with discontinuous coefficient and
//! a numerical check of its weak formulation.

use super::{FluxPair, MacroSolution};
use crate::error::{invalid, Error, Result};

/// `Θ(λ,ρ)` solving `(f(λ)-f(ρ))/(λ-ρ) = Θ f′(ρ) + (1-Θ) f′(λ)`.
pub fn theta(flux: &FluxPair, lambda: f64, rho: f64) -> Result<f64> {
    if lambda == rho || !lambda.is_finite() || !rho.is_finite() {
        return invalid(format!("theta needs distinct finite densities, got {lambda} and {rho}"));
    }
    let secant = (flux.f(lambda) - flux.f(rho)) / (lambda - rho);
    let (dl, dr) = (flux.f_prime(lambda), flux.f_prime(rho));
    Ok(((dl - secant) / (dl - dr)).clamp(0.0, 1.0))
}

/// Value assigned to `v` at a shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// `θ v0(y⁺) + (1-θ) v0(y⁻)`.
    Theta,
    /// `v0(y⁺)` alone.
    PlusOnly,
}

impl MacroSolution {
    /// `v(x,t) = θ v0(y⁺) + (1-θ) v0(y⁻)`, `θ = Θ(ρ⁻, ρ⁺)`.
    pub fn v_weak(&self, v0: impl Fn(f64) -> f64, x: f64, t: f64) -> Result<f64> {
        self.v_with(&v0, x, t, Averaging::Theta)
    }

    pub fn v_with(&self, v0: &dyn Fn(f64) -> f64, x: f64, t: f64, avg: Averaging) -> Result<f64> {
        if !(t > 0.0) {
            return invalid(format!("transport value needs t > 0, got {t}"));
        }
        let e = self.extremes(x, t);
        let (ym, yp) = (e.minus.y, e.plus.y);
        if yp - ym <= self.tol_shock {
            return Ok(v0(yp));
        }
        Ok(match avg {
            Averaging::PlusOnly => v0(yp),
            Averaging::Theta => {
                let rm = self.flux.b((x - ym) / t);
                let rp = self.flux.b((x - yp) / t);
                let th = if rm == rp { 0.5 } else { theta(&self.flux, rm, rp)? };
                th * v0(yp) + (1.0 - th) * v0(ym)
            }
        })
    }
}

/// Smooth compactly supported `φ(x,t)` on `[x_lo, x_hi] × [0, t_hi]`.
pub trait TestFunction {
    fn value(&self, x: f64, t: f64) -> f64;
    fn d_x(&self, x: f64, t: f64) -> f64;
    fn d_t(&self, x: f64, t: f64) -> f64;
    fn x_support(&self) -> (f64, f64);
    fn t_extent(&self) -> f64;
}

// exp(1 - 1/(1-u²)) on |u| < 1, with value 1 at 0
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

fn bump_prime(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - u * u;
        bump(u) * (-2.0 * u / (q * q))
    }
}

/// `φ(x,t) = ψ((x-c)/w) ψ(t/T)` with the standard bump `ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTest {
    pub center: f64,
    pub half_width: f64,
    pub t_extent: f64,
}

impl TestFunction for BumpTest {
    fn value(&self, x: f64, t: f64) -> f64 {
        bump((x - self.center) / self.half_width) * bump(t / self.t_extent)
    }
    fn d_x(&self, x: f64, t: f64) -> f64 {
        bump_prime((x - self.center) / self.half_width) / self.half_width * bump(t / self.t_extent)
    }
    fn d_t(&self, x: f64, t: f64) -> f64 {
        bump((x - self.center) / self.half_width) * bump_prime(t / self.t_extent) / self.t_extent
    }
    fn x_support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
    fn t_extent(&self) -> f64 {
        self.t_extent
    }
}

/// Quadrature cell sizes in space and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub dx: f64,
    pub dt: f64,
}

impl Mesh {
    pub fn halved(self) -> Self {
        Self {
            dx: 0.5 * self.dx,
            dt: 0.5 * self.dt,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Left,
    Right,
    Inside,
}

struct Slice<'a> {
    sol: &'a MacroSolution,
    v0: &'a dyn Fn(f64) -> f64,
    phi: &'a dyn TestFunction,
    t: f64,
}

impl Slice<'_> {
    // integrand of the absolutely continuous part at x, taken as the limit
    // from the requested side: φ_t v + v (φ F)_x with F = f′(ρ)
    fn density(&self, x: f64, side: Side) -> f64 {
        let e = self.sol.extremes(x, self.t);
        let c = if side == Side::Left { e.minus } else { e.plus };
        let fl = &self.sol.flux;
        let arg = (x - c.y) / self.t;
        let rho = fl.b(arg);
        let big_f = fl.f_prime(rho);
        let d_rho = fl.b_prime(arg) * (1.0 - c.slope) / self.t;
        let d_big_f = fl.f_second(rho) * d_rho;
        let v = (self.v0)(c.y);
        let phi = self.phi;
        v * (phi.d_t(x, self.t) + phi.d_x(x, self.t) * big_f + phi.value(x, self.t) * d_big_f)
    }

    fn simpson(&self, l: f64, r: f64) -> f64 {
        if r <= l {
            return 0.0;
        }
        let m = 0.5 * (l + r);
        (r - l) / 6.0 * (self.density(l, Side::Right) + 4.0 * self.density(m, Side::Inside) + self.density(r, Side::Left))
    }

    fn y_left(&self, x: f64) -> f64 {
        self.sol.extremes(x, self.t).minus.y
    }

    fn y_right(&self, x: f64) -> f64 {
        self.sol.extremes(x, self.t).plus.y
    }

    // true when (l, r] holds a discontinuity of the minimizer; without one
    // the minimizer moves by at most r - l
    fn jumps(&self, l: f64, r: f64, eps: f64) -> bool {
        self.y_left(r) - self.y_right(l) > (r - l) + eps
    }
}

/// Sum of the three terms of the weak transport criterion for `v` built from
/// `v0` with the given averaging at shocks. Vanishes for the exact weak
/// solution up to quadrature error.
pub fn weak_residual(
    sol: &MacroSolution,
    v0: &dyn Fn(f64) -> f64,
    phi: &dyn TestFunction,
    mesh: Mesh,
    avg: Averaging,
) -> Result<f64> {
    if !(mesh.dx > 0.0 && mesh.dt > 0.0) {
        return invalid("mesh sizes must be positive");
    }
    let (x_lo, x_hi) = phi.x_support();
    let t_hi = phi.t_extent();
    let nx = ((x_hi - x_lo) / mesh.dx).ceil().max(1.0) as usize;
    let nt = (t_hi / mesh.dt).ceil().max(1.0) as usize;
    let dx = (x_hi - x_lo) / nx as f64;
    let dt = t_hi / nt as f64;
    let node = |j: usize| x_lo + dx * j as f64;

    let mut space_time = 0.0;
    for m in 0..nt {
        let t = (m as f64 + 0.5) * dt;
        let slice = Slice { sol, v0, phi, t };
        let mut row = 0.0;
        for j in 0..nx {
            let (l, r) = (node(j), node(j + 1));
            let eps = 1e-10 * (1.0 + l.abs().max(r.abs()));
            let mut shock_at = None;
            if slice.jumps(l, r, eps) {
                let (mut a, mut b) = (l, r);
                // the discontinuity stays in (a, b]
                let x_star = loop {
                    let mid = 0.5 * (a + b);
                    if sol.is_shock(mid, t) {
                        break mid;
                    }
                    if mid <= a || mid >= b {
                        break b;
                    }
                    if slice.jumps(a, mid, eps) {
                        b = mid;
                    } else {
                        a = mid;
                    }
                };
                if x_star > l && slice.jumps(l, x_star, eps) {
                    // a discontinuity strictly left of the located one
                    return Err(refine(l, r, t));
                }
                if x_star < r && slice.y_left(r) - slice.y_right(x_star) > (r - x_star) + eps {
                    return Err(refine(l, r, t));
                }
                shock_at = Some(x_star);
                row += slice.simpson(l, x_star) + slice.simpson(x_star, r);
            } else {
                row += slice.simpson(l, r);
            }
            if let Some(xs) = shock_at {
                row += jump_term(&slice, xs, avg)?;
            }
        }
        space_time += row * dt;
    }

    // initial term ∫ v0 φ(·,0), composite Simpson
    let mut initial = 0.0;
    for j in 0..nx {
        let (l, r) = (node(j), node(j + 1));
        let m = 0.5 * (l + r);
        let h = |x: f64| v0(x) * phi.value(x, 0.0);
        initial += (r - l) / 6.0 * (h(l) + 4.0 * h(m) + h(r));
    }
    Ok(space_time + initial)
}

fn refine(l: f64, r: f64, t: f64) -> Error {
    Error::RefinementRequired(format!("more than one shock in cell [{l}, {r}] at t = {t}"))
}

// atom of the Stieltjes integral at a shock: v̄ φ (F(x+) - F(x-))
fn jump_term(slice: &Slice<'_>, x: f64, avg: Averaging) -> Result<f64> {
    let sol = slice.sol;
    let e = sol.extremes(x, slice.t);
    let fl = &sol.flux;
    let f_plus = fl.f_prime(fl.b((x - e.plus.y) / slice.t));
    let f_minus = fl.f_prime(fl.b((x - e.minus.y) / slice.t));
    let v = sol.v_with(slice.v0, x, slice.t, avg)?;
    Ok(v * slice.phi.value(x, slice.t) * (f_plus - f_minus))
}
