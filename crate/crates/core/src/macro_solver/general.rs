//! Hopf-Lax values for an arbitrary callable `u0` by grid search plus local
//! refinement. Carries only a grid-level accuracy guarantee.

use super::{FluxPair, MinimizerSet};
use crate::error::{invalid, Result};

pub struct GridHopfLax<U: Fn(f64) -> f64> {
    pub u0: U,
    pub flux: FluxPair,
    /// Minimizers are searched in `[x - reach, x]`.
    pub reach: f64,
    pub grid_points: usize,
    /// Values within this relative gap of the minimum count as minimizers.
    pub tol: f64,
}

impl<U: Fn(f64) -> f64> GridHopfLax<U> {
    pub fn new(u0: U, reach: f64) -> Self {
        Self {
            u0,
            flux: FluxPair,
            reach,
            grid_points: 20_001,
            tol: 1e-6,
        }
    }

    fn objective(&self, x: f64, t: f64, y: f64) -> f64 {
        (self.u0)(y) + t * self.flux.g((x - y) / t)
    }

    // golden-section search on [a, b]
    fn refine(&self, x: f64, t: f64, mut a: f64, mut b: f64) -> (f64, f64) {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (self.objective(x, t, c), self.objective(x, t, d));
        for _ in 0..100 {
            if b - a <= 1e-13 * (1.0 + x.abs()) {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = self.objective(x, t, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = self.objective(x, t, d);
            }
        }
        let y = 0.5 * (a + b);
        let mut best = (y, self.objective(x, t, y));
        for e in [a, b] {
            let v = self.objective(x, t, e);
            if v < best.1 {
                best = (e, v);
            }
        }
        best
    }

    pub fn minimizers(&self, x: f64, t: f64) -> Result<MinimizerSet> {
        if !(t >= 0.0) {
            return invalid(format!("time must be nonnegative, got {t}"));
        }
        if t == 0.0 {
            return Ok(MinimizerSet {
                y_minus: x,
                y_plus: x,
                members: vec![x],
                value: (self.u0)(x),
            });
        }
        let n = self.grid_points.max(3);
        let h = self.reach / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|i| x - self.reach + h * i as f64).collect();
        let vals: Vec<f64> = ys.iter().map(|&y| self.objective(x, t, y)).collect();
        // refine around every grid-local minimum
        let mut local = Vec::new();
        for i in 0..n {
            let left = i == 0 || vals[i] <= vals[i - 1];
            let right = i == n - 1 || vals[i] <= vals[i + 1];
            if left && right {
                let a = ys[i.saturating_sub(1)];
                let b = ys[(i + 1).min(n - 1)];
                local.push(self.refine(x, t, a, b));
            }
        }
        let best = local.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let tol = self.tol * (1.0 + best.abs());
        let mut members: Vec<f64> = local.iter().filter(|p| p.1 <= best + tol).map(|p| p.0).collect();
        members.sort_by(f64::total_cmp);
        members.dedup_by(|a, b| (*a - *b).abs() <= 2.0 * h);
        Ok(MinimizerSet {
            y_minus: members[0],
            y_plus: *members.last().unwrap(),
            members,
            value: best,
        })
    }

    pub fn u_value(&self, x: f64, t: f64) -> Result<f64> {
        self.minimizers(x, t).map(|m| m.value)
    }
}
