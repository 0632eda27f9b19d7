//! Forward characteristics `w±(a; s, t)` by bisection on the monotone maps
//! `x ↦ y±(x; s, t)`.

use super::MacroSolution;
use crate::error::{invalid, Result};

const MAX_BISECT: usize = 200;

impl MacroSolution {
    // y⁻ or y⁺ of (x; s, t); s = 0 is the plain minimizer. Ties are exact
    // here: a tolerance band would blur the crossing point by tol/Δρ.
    fn y_at(&self, x: f64, s: f64, t: f64, plus: bool) -> f64 {
        let e = self.extremes_tol(x, t, 0.0);
        let y = if plus { e.plus.y } else { e.minus.y };
        if s == 0.0 {
            y
        } else {
            let r = s / t;
            r * x + (1.0 - r) * y
        }
    }

    /// `w⁻ = inf{x : y(x;s,t) >= a}` and `w⁺ = sup{x : y(x;s,t) <= a}`.
    pub fn forward_char(&self, a: f64, s: f64, t: f64) -> Result<(f64, f64)> {
        if !(s >= 0.0 && s < t && t.is_finite() && a.is_finite()) {
            return invalid(format!("forward characteristic needs 0 <= s < t, got s={s}, t={t}"));
        }
        // y(x) >= x - t f′(ρ_max), so any x past this bound maps beyond a
        let hi = a + t * self.flux.f_prime(self.profile.rho_max()) + 1.0;
        let scale = 1.0 + a.abs().max(hi.abs());

        // w⁻: first x with y⁺(x) >= a; x < a always maps below a
        let w_minus = if self.y_at(a, s, t, true) >= a {
            a
        } else {
            let (mut lo, mut up) = (a, hi);
            for _ in 0..MAX_BISECT {
                if up - lo <= 1e-15 * scale {
                    break;
                }
                let mid = 0.5 * (lo + up);
                if self.y_at(mid, s, t, true) >= a {
                    up = mid;
                } else {
                    lo = mid;
                }
            }
            up
        };

        // w⁺: last x with y⁻(x) <= a; true at x = a
        let (mut lo, mut up) = (a, hi);
        for _ in 0..MAX_BISECT {
            if up - lo <= 1e-15 * scale {
                break;
            }
            let mid = 0.5 * (lo + up);
            if self.y_at(mid, s, t, false) <= a {
                lo = mid;
            } else {
                up = mid;
            }
        }
        Ok((w_minus, lo.max(w_minus)))
    }

    /// `w(a; 0, t)` for the right-continuous choice, used by transport code.
    pub fn characteristic(&self, a: f64, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(a);
        }
        self.forward_char(a, 0.0, t).map(|w| w.0)
    }
}
