//! Longest increasing chains `L` and the inverse width `Γ`.
//!
//! A chain is strictly increasing in both coordinates. Everything here runs
//! a single patience sweep over points in increasing `x`; points sharing an
//! `x` are fed in decreasing `t` so they can never extend each other.

use crate::error::{Error, Result};
use crate::poisson_field::{cmp_xt, Point, PointSource, Rect};

/// Patience piles: `pile_tops[j]` is the smallest last `t` over chains of
/// length `j + 1` seen so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatienceState {
    pile_tops: Vec<f64>,
}

impl PatienceState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.pile_tops.len()
    }

    pub fn pile_tops(&self) -> &[f64] {
        &self.pile_tops
    }

    /// Offers a point with time coordinate `t`; returns true when the longest
    /// chain grew.
    #[inline]
    pub fn push(&mut self, t: f64) -> bool {
        let pos = self.pile_tops.partition_point(|&top| top < t);
        if pos == self.pile_tops.len() {
            self.pile_tops.push(t);
            true
        } else {
            self.pile_tops[pos] = t;
            false
        }
    }
}

/// Feeds `x`-sorted points to `visit` so that points with equal `x` arrive in
/// decreasing `t`. `visit` returns `false` to stop early.
pub(crate) fn for_each_strict<I, F>(points: I, mut visit: F)
where
    I: Iterator<Item = Point>,
    F: FnMut(Point) -> bool,
{
    let mut pending: Vec<Point> = Vec::new();
    let flush = |pending: &mut Vec<Point>, visit: &mut F| -> bool {
        if pending.len() > 1 {
            pending.sort_by(|a, b| b.t.total_cmp(&a.t));
        }
        for p in pending.drain(..) {
            if !visit(p) {
                return false;
            }
        }
        true
    };
    for p in points {
        if let Some(last) = pending.last() {
            if last.x != p.x && !flush(&mut pending, &mut visit) {
                return;
            }
        }
        pending.push(p);
    }
    flush(&mut pending, &mut visit);
}

/// Length of the longest chain `x_1 < ... < x_m`, `t_1 < ... < t_m`.
pub fn lis_count(points: &[Point]) -> usize {
    let mut sorted = points.to_vec();
    sorted.sort_by(cmp_xt);
    let mut piles = PatienceState::new();
    for_each_strict(sorted.into_iter(), |p| {
        piles.push(p.t);
        true
    });
    piles.count()
}

/// `L((a,s),(b,t))`: longest chain inside `(a,b] x (s,t]`.
pub fn l_between<F: PointSource>(field: &F, lower: (f64, f64), upper: (f64, f64)) -> Result<usize> {
    let bx = Rect::new(lower.0, upper.0, lower.1, upper.1)?;
    let region = field.region();
    if !region.contains_rect(&bx) {
        return Err(Error::OutOfCoverage {
            what: format!("({}, {}] x ({}, {}]", bx.x0, bx.x1, bx.t0, bx.t1),
            coverage: format!(
                "({}, {}] x ({}, {}]",
                region.x_min, region.x_max, region.t_min, region.t_max
            ),
        });
    }
    let mut piles = PatienceState::new();
    let pts = field
        .scan_from(bx.x0)
        .take_while(|p| p.x <= bx.x1)
        .filter(|p| bx.t0 < p.t && p.t <= bx.t1);
    for_each_strict(pts, |p| {
        piles.push(p.t);
        true
    });
    Ok(piles.count())
}

fn strip_check<F: PointSource>(field: &F, a: f64, s: f64, tau: f64) -> Result<()> {
    let r = field.region();
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("strip height must be positive, got {tau}")));
    }
    if a < r.x_min || s < r.t_min || s + tau > r.t_max {
        return Err(Error::OutOfCoverage {
            what: format!("strip ({a}, ..] x ({s}, {}]", s + tau),
            coverage: format!("({}, {}] x ({}, {}]", r.x_min, r.x_max, r.t_min, r.t_max),
        });
    }
    Ok(())
}

/// Absolute `x` of the point completing the `m`-th pile of the strip
/// `(a, ..] x (s, s+τ]`, for `m = 0..` as far as the field allows, capped at
/// `m_max`. Entry 0 is `a` itself.
pub fn completion_points<F: PointSource>(
    field: &F,
    origin: (f64, f64),
    m_max: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    let (a, s) = origin;
    strip_check(field, a, s, tau)?;
    let top = s + tau;
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(a);
    if m_max == 0 {
        return Ok(out);
    }
    let mut piles = PatienceState::new();
    let pts = field.scan_from(a).filter(|p| s < p.t && p.t <= top);
    for_each_strict(pts, |p| {
        if piles.push(p.t) {
            out.push(p.x);
        }
        out.len() <= m_max
    });
    Ok(out)
}

/// Widths `Γ((a,s), m, τ)` for `m = 0..` as far as the field allows, capped at
/// `m_max`. Entry `m` is the `x`-distance from `a` to the point completing
/// the `m`-th pile.
pub fn gamma_profile_partial<F: PointSource>(
    field: &F,
    origin: (f64, f64),
    m_max: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    let a = origin.0;
    let mut out = completion_points(field, origin, m_max, tau)?;
    for h in out.iter_mut() {
        *h -= a;
    }
    Ok(out)
}

/// `Γ` for every `m <= m_max` in one sweep.
pub fn gamma_profile<F: PointSource>(
    field: &F,
    origin: (f64, f64),
    m_max: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    let out = gamma_profile_partial(field, origin, m_max, tau)?;
    if out.len() <= m_max {
        return Err(Error::FieldExhausted {
            achieved: (out.len() - 1) as u64,
            requested: m_max as u64,
        });
    }
    Ok(out)
}

/// `Γ((a,s), m, τ) = inf{h >= 0 : L((a,s),(a+h,s+τ)) >= m}`.
pub fn gamma<F: PointSource>(field: &F, origin: (f64, f64), m: usize, tau: f64) -> Result<f64> {
    gamma_profile(field, origin, m, tau).map(|p| p[m])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson_field::{sample_field, PointField, Region};
    use crate::rng::{rng_from_seed, stream_seed, Purpose};
    use proptest::prelude::*;
    use rand::Rng;

    /// Exhaustive longest chain over all subsets.
    fn brute_lis(points: &[Point]) -> usize {
        let n = points.len();
        let mut best = 0;
        for mask in 0u32..(1 << n) {
            let mut chosen: Vec<Point> =
                (0..n).filter(|i| mask >> i & 1 == 1).map(|i| points[i]).collect();
            chosen.sort_by(cmp_xt);
            let ok = chosen.windows(2).all(|w| w[0].x < w[1].x && w[0].t < w[1].t);
            if ok {
                best = best.max(chosen.len());
            }
        }
        best
    }

    #[test]
    fn small_cases() {
        assert_eq!(lis_count(&[]), 0);
        let chain = [Point::new(1.0, 1.0), Point::new(2.0, 2.0), Point::new(3.0, 3.0)];
        assert_eq!(lis_count(&chain), 3);
        let anti = [Point::new(1.0, 3.0), Point::new(2.0, 2.0), Point::new(3.0, 1.0)];
        assert_eq!(lis_count(&anti), 1);
        // equal x or equal t never chain
        let ties = [Point::new(1.0, 1.0), Point::new(1.0, 2.0), Point::new(2.0, 2.0)];
        assert_eq!(lis_count(&ties), 2);
    }

    #[test]
    fn matches_exhaustive_on_integer_grids() {
        // coarse integer coordinates force many ties
        let mut rng = rng_from_seed(stream_seed(1, 0, Purpose::Auxiliary));
        for _ in 0..1000 {
            let k = rng.random_range(0..=8);
            let pts: Vec<Point> = (0..k)
                .map(|_| {
                    Point::new(
                        rng.random_range(0..5) as f64,
                        rng.random_range(0..5) as f64,
                    )
                })
                .collect();
            assert_eq!(lis_count(&pts), brute_lis(&pts), "{pts:?}");
        }
    }

    #[test]
    fn gamma_single_point() {
        let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let f = PointField::from_points(0, region, 1.0, vec![Point::new(0.5, 0.5)]).unwrap();
        assert_eq!(gamma(&f, (0.0, 0.0), 0, 1.0).unwrap(), 0.0);
        assert_eq!(gamma(&f, (0.0, 0.0), 1, 1.0).unwrap(), 0.5);
        assert_eq!(
            gamma(&f, (0.0, 0.0), 2, 1.0),
            Err(Error::FieldExhausted {
                achieved: 1,
                requested: 2
            })
        );
        // strip below the point
        assert!(matches!(
            gamma(&f, (0.0, 0.0), 1, 0.25),
            Err(Error::FieldExhausted { achieved: 0, .. })
        ));
    }

    #[test]
    fn degenerate_box_is_zero() {
        let f = sample_field(3, Region::new(0.0, 4.0, 0.0, 4.0).unwrap(), 5.0).unwrap();
        assert_eq!(l_between(&f, (1.0, 1.0), (1.0, 3.0)).unwrap(), 0);
        assert_eq!(l_between(&f, (1.0, 2.0), (3.0, 2.0)).unwrap(), 0);
        assert!(l_between(&f, (1.0, 1.0), (5.0, 3.0)).is_err());
    }

    #[test]
    fn profile_consistent_with_gamma_and_inverse() {
        let region = Region::new(0.0, 30.0, 0.0, 10.0).unwrap();
        for seed in 0..20 {
            let f = sample_field(seed, region, 1.0).unwrap();
            // origin at x = 0 so that a + h reproduces the point exactly
            let prof = gamma_profile(&f, (0.0, 1.0), 12, 8.0).unwrap();
            assert!(prof.windows(2).all(|w| w[0] <= w[1]));
            for (m, &h) in prof.iter().enumerate() {
                assert_eq!(gamma(&f, (0.0, 1.0), m, 8.0).unwrap(), h);
                if m >= 1 {
                    assert!(l_between(&f, (0.0, 1.0), (h, 9.0)).unwrap() >= m);
                    // just left of the completing point the count is short
                    assert!(l_between(&f, (0.0, 1.0), (h.next_down(), 9.0)).unwrap() < m);
                }
            }
            // taller strips need no more width
            let taller = gamma_profile(&f, (0.0, 0.5), 12, 9.5).unwrap();
            assert!(taller.iter().zip(&prof).all(|(a, b)| a <= b));
        }
    }

    proptest! {
        #[test]
        fn lis_matches_exhaustive(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..=10)) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, t)| Point::new(x, t)).collect();
            prop_assert_eq!(lis_count(&pts), brute_lis(&pts));
        }

        #[test]
        fn l_monotone_under_enlargement(seed in 0u64..1000, a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let f = sample_field(seed, Region::new(0.0, 10.0, 0.0, 10.0).unwrap(), 2.0).unwrap();
            let small = l_between(&f, (3.0 - a, 3.0 - b), (6.0, 6.0)).unwrap();
            let big = l_between(&f, (3.0 - a, 3.0 - b), (6.0 + a, 6.0 + b)).unwrap();
            prop_assert!(small <= big);
        }
    }
}
