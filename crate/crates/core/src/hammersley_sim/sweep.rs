//! Exact evaluation of `z_k(nt) = min_i { z_i(0) + Γ((z_i(0),0), k-i, nt) }`.
//!
//! Writing `L_i(x)` for the longest chain in `(z_i(0), x] x (0, nt]`,
//! `z_k(nt) = inf{x : N(x) >= k}` with `N(x) = max_{z_i(0) <= x} (i + L_i(x))`.
//! One left-to-right sweep maintains `N` for all sources at once: the level
//! function `c ↦ max_i (i + L_i(x; t <= c))` equals `base + #{tops <= c}`,
//! a point updates the tops as in patience sorting and a source arrival
//! drops the lowest top and bumps `base`.

use std::collections::BTreeSet;

use super::{ParticleState, WindowSpec};
use crate::error::{invalid, Error, Result};
use crate::increasing_seq::{completion_points, for_each_strict, PatienceState};
use crate::poisson_field::{Point, PointSource};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvolveOptions {
    /// Labels whose values must not depend on the guard band. Violations
    /// raise `WindowTooSmall`. Other labels are finite-window values.
    pub targets: Vec<i64>,
    /// Also compute the smallest minimizing source label of each target.
    pub argmins: bool,
}

impl EvolveOptions {
    pub fn targets(targets: Vec<i64>) -> Self {
        Self {
            targets,
            argmins: false,
        }
    }

    pub fn with_argmins(mut self) -> Self {
        self.argmins = true;
        self
    }
}

// patience piles with O(1) removal of the lowest top
#[derive(Debug, Clone)]
struct Levels {
    base: i64,
    tops: Vec<f64>,
    head: usize,
}

impl Levels {
    fn new(base: i64) -> Self {
        Self {
            base,
            tops: Vec::new(),
            head: 0,
        }
    }

    #[inline]
    fn level(&self) -> i64 {
        self.base + (self.tops.len() - self.head) as i64
    }

    #[inline]
    fn point(&mut self, t: f64) {
        let live = &self.tops[self.head..];
        let pos = live.partition_point(|&top| top < t);
        if pos == live.len() {
            self.tops.push(t);
        } else {
            self.tops[self.head + pos] = t;
        }
    }

    #[inline]
    fn source(&mut self) {
        self.base += 1;
        if self.head < self.tops.len() {
            self.head += 1;
            if self.head >= 1024 && 2 * self.head >= self.tops.len() {
                self.tops.drain(..self.head);
                self.head = 0;
            }
        }
    }

    fn same_as(&self, other: &Levels) -> bool {
        self.base == other.base && self.tops[self.head..] == other.tops[other.head..]
    }
}

fn check_inputs<F: PointSource>(state0: &ParticleState, field: &F, t: f64) -> Result<f64> {
    if state0.time != 0.0 {
        return invalid("evolution starts from time-zero data only");
    }
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("evolution time must be positive, got {t}"));
    }
    let nt = state0.n() as f64 * t;
    let r = field.region();
    let a0 = state0.positions()[0];
    if r.x_min > a0 || r.t_min > 0.0 || r.t_max < nt {
        return Err(Error::OutOfCoverage {
            what: format!("strip ({a0}, ..] x (0, {nt}]"),
            coverage: format!("({}, {}] x ({}, {}]", r.x_min, r.x_max, r.t_min, r.t_max),
        });
    }
    Ok(nt)
}

/// Evolves time-zero data to macroscopic time `t` on the shared `field`.
///
/// Every label of the window gets its exact finite-window value; labels in
/// `opts.targets` are additionally certified not to depend on the guard band.
pub fn evolve_variational<F: PointSource>(
    state0: &ParticleState,
    field: &F,
    t: f64,
    opts: &EvolveOptions,
) -> Result<ParticleState> {
    let nt = check_inputs(state0, field, t)?;
    let w = state0.window;
    let src = state0.positions();
    let targets: BTreeSet<i64> = opts.targets.iter().copied().collect();
    if let Some(&k) = targets.iter().find(|&&k| !w.contains(k)) {
        return invalid(format!("target label {k} outside window [{}, {}]", w.i_min, w.i_max));
    }
    let guard_end = w.guard_end();
    let too_small = |label: i64, argmin: i64| Error::WindowTooSmall {
        label,
        argmin,
        guard_end,
        suggested_i_min: suggest(&w),
    };
    if let Some(&k) = targets.iter().find(|&&k| k <= guard_end) {
        return Err(too_small(k, k));
    }

    let mut sw = Sweep {
        w,
        src,
        targets: &targets,
        z: vec![f64::NAN; w.len()],
        main: Levels::new(w.i_min - 1),
        shadow: None,
        shadow_done: false,
        next_src: 0,
        assigned: w.i_min - 1,
        failure: None,
    };
    let mut running = sw.arrive(src[0], true);
    if running {
        let pts = field.scan_from(src[0]).filter(|p| p.t <= nt);
        for_each_strict(pts, |p: Point| {
            // a source at p.x has the box (p.x, ..], so p comes first
            running = sw.arrive(p.x, false) && sw.point(p);
            running
        });
    }
    if running {
        sw.arrive(field.region().x_max, true);
    }
    if let Some(e) = sw.failure {
        return Err(e);
    }
    if sw.assigned < w.i_max {
        return Err(Error::FieldExhausted {
            achieved: (sw.assigned - w.i_min + 1) as u64,
            requested: w.len() as u64,
        });
    }
    let z = sw.z;

    let mut out = ParticleState::from_positions(w, t, z)?;
    if opts.argmins {
        for &k in &targets {
            let v = out.position(k).expect("assigned");
            let i = smallest_argmin(state0, field, nt, k, v);
            if i <= guard_end {
                return Err(too_small(k, i));
            }
            out.argmins.insert(k, i);
        }
    }
    Ok(out)
}

struct Sweep<'a> {
    w: WindowSpec,
    src: &'a [f64],
    targets: &'a BTreeSet<i64>,
    z: Vec<f64>,
    main: Levels,
    // the same sweep without guard-band sources, until the two coincide
    shadow: Option<Levels>,
    shadow_done: bool,
    next_src: usize,
    assigned: i64,
    failure: Option<Error>,
}

impl Sweep<'_> {
    // records labels reached at x; false once all are assigned or a target
    // failed its guard check
    fn settle(&mut self, x: f64) -> bool {
        let w = self.w;
        let reach = self.main.level().min(w.i_max);
        while self.assigned < reach {
            self.assigned += 1;
            let k = self.assigned;
            self.z[(k - w.i_min) as usize] = x;
            if !self.shadow_done && self.targets.contains(&k) {
                let ok = self.shadow.as_ref().is_some_and(|s| s.level() >= k);
                if !ok {
                    self.failure = Some(Error::WindowTooSmall {
                        label: k,
                        argmin: w.guard_end(),
                        guard_end: w.guard_end(),
                        suggested_i_min: suggest(&w),
                    });
                    return false;
                }
            }
        }
        self.assigned < w.i_max
    }

    // sources up to `limit`
    fn arrive(&mut self, limit: f64, inclusive: bool) -> bool {
        while self.next_src < self.src.len() {
            let a = self.src[self.next_src];
            if a > limit || (!inclusive && a == limit) {
                break;
            }
            let label = self.w.i_min + self.next_src as i64;
            self.next_src += 1;
            self.main.source();
            if let Some(s) = self.shadow.as_mut() {
                s.source();
                if self.main.same_as(s) {
                    self.shadow = None;
                    self.shadow_done = true;
                }
            } else if !self.shadow_done && label == self.w.guard_end() + 1 {
                self.shadow = Some(Levels::new(label));
            }
            if !self.settle(a) {
                return false;
            }
        }
        true
    }

    #[inline]
    fn point(&mut self, p: Point) -> bool {
        self.main.point(p.t);
        if let Some(s) = self.shadow.as_mut() {
            s.point(p.t);
        }
        self.settle(p.x)
    }
}

fn suggest(w: &WindowSpec) -> i64 {
    w.i_min - (w.i_max - w.i_min) / 2 - w.guard
}

/// `min{i : i + L_i(v) >= k}` by a right-to-left sweep from `v`.
fn smallest_argmin<F: PointSource>(state0: &ParticleState, field: &F, nt: f64, k: i64, v: f64) -> i64 {
    let src = state0.positions();
    let i_min = state0.i_min();
    let pts: Vec<Point> = field
        .scan_from(src[0])
        .take_while(|p| p.x <= v)
        .filter(|p| p.t <= nt)
        .collect();
    // chains read right to left decrease in t: patience on -t
    let mut piles = PatienceState::new();
    let mut j = pts.len();
    let mut best = k;
    let last_src = src.partition_point(|&a| a <= v);
    for s in (0..last_src).rev() {
        let a = src[s];
        // points strictly right of a, equal-x groups in increasing t
        while j > 0 && pts[j - 1].x > a {
            let x = pts[j - 1].x;
            let mut g = j - 1;
            while g > 0 && pts[g - 1].x == x {
                g -= 1;
            }
            let mut group: Vec<f64> = pts[g..j].iter().map(|p| p.t).collect();
            group.sort_by(f64::total_cmp);
            for tt in group {
                piles.push(-tt);
            }
            j = g;
        }
        let label = i_min + s as i64;
        if label + piles.count() as i64 >= k {
            best = best.min(label);
        }
    }
    best
}

/// Direct minimization over sources, one `Γ` profile per source. Quadratic
/// in the window size; the reference for the sweep.
pub fn evolve_variational_brute<F: PointSource>(
    state0: &ParticleState,
    field: &F,
    t: f64,
) -> Result<ParticleState> {
    let nt = check_inputs(state0, field, t)?;
    let w = state0.window;
    let mut z = vec![f64::INFINITY; w.len()];
    let mut arg = vec![i64::MAX; w.len()];
    for (s, &a) in state0.positions().iter().enumerate() {
        let m_max = w.len() - 1 - s;
        let xs = completion_points(field, (a, 0.0), m_max, nt)?;
        for (m, &x) in xs.iter().enumerate() {
            let j = s + m;
            if x < z[j] {
                z[j] = x;
                arg[j] = w.i_min + s as i64;
            }
        }
    }
    if let Some(j) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::FieldExhausted {
            achieved: j as u64,
            requested: w.len() as u64,
        });
    }
    let mut out = ParticleState::from_positions(w, t, z)?;
    out.argmins = (0..w.len()).map(|j| (w.i_min + j as i64, arg[j])).collect();
    Ok(out)
}

/// `z_k(n t_j)` for each time of `t_grid`, all on the same field.
pub fn tagged_trajectory<F: PointSource>(
    state0: &ParticleState,
    field: &F,
    k: i64,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    tagged_trajectory_with_argmins(state0, field, k, t_grid, false).map(|v| v.into_iter().map(|p| p.0).collect())
}

/// As `tagged_trajectory`, optionally with the smallest minimizing label.
pub fn tagged_trajectory_with_argmins<F: PointSource>(
    state0: &ParticleState,
    field: &F,
    k: i64,
    t_grid: &[f64],
    argmins: bool,
) -> Result<Vec<(f64, Option<i64>)>> {
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("time grid must be increasing");
    }
    let z0 = state0
        .position(k)
        .ok_or_else(|| Error::InvalidArgument(format!("label {k} not present at time zero")))?;
    let opts = EvolveOptions {
        targets: vec![k],
        argmins,
    };
    t_grid
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok((z0, argmins.then_some(k)));
            }
            let s = evolve_variational(state0, field, t, &opts)?;
            Ok((s.position(k).expect("assigned"), s.argmin(k)))
        })
        .collect()
}
