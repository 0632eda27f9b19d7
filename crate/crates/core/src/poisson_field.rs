//! Homogeneous planar Poisson point fields on rectangles.
//!
//! Points are generated in increasing `x` by exponential spacings of the
//! projected one-dimensional process (rate `rate * height`), with independent
//! uniform `t` coordinates. The list is therefore sorted by construction, and
//! the same seed always reproduces the same points whether the field is
//! materialised ([`PointField`]) or streamed ([`FieldStream`]).

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;

/// A space-time point: `x` is the spatial coordinate, `t` the time coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

impl Point {
    pub const fn new(x: f64, t: f64) -> Self {
        Point { x, t }
    }
}

/// Orders by `x`, ties broken by `t`.
pub fn cmp_xt(a: &Point, b: &Point) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.t.total_cmp(&b.t))
}

/// A nondegenerate sampling rectangle `(x_min, x_max] x (t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, t_min, t_max].iter().all(|v| v.is_finite());
        if !finite || !(x_min < x_max) || !(0.0 <= t_min && t_min < t_max) {
            return invalid(format!(
                "degenerate region x=({x_min}, {x_max}] t=({t_min}, {t_max}]"
            ));
        }
        Ok(Region {
            x_min,
            x_max,
            t_min,
            t_max,
        })
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.t_max - self.t_min)
    }

    pub fn contains_rect(&self, r: &Rect) -> bool {
        self.x_min <= r.x0 && r.x1 <= self.x_max && self.t_min <= r.t0 && r.t1 <= self.t_max
    }

    fn describe(&self) -> String {
        format!(
            "({}, {}] x ({}, {}]",
            self.x_min, self.x_max, self.t_min, self.t_max
        )
    }
}

/// A query box `(x0, x1] x (t0, t1]`; may be empty (`x0 == x1` or `t0 == t1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, t0: f64, t1: f64) -> Result<Self> {
        if !(x0 <= x1 && t0 <= t1) {
            return invalid(format!("inverted box ({x0}, {x1}] x ({t0}, {t1}]"));
        }
        Ok(Rect { x0, x1, t0, t1 })
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.x0 < p.x && p.x <= self.x1 && self.t0 < p.t && p.t <= self.t1
    }
}

impl From<Region> for Rect {
    fn from(r: Region) -> Self {
        Rect {
            x0: r.x_min,
            x1: r.x_max,
            t0: r.t_min,
            t1: r.t_max,
        }
    }
}

/// Anything that can enumerate Poisson points in increasing `x`.
pub trait PointSource {
    type Scan<'a>: Iterator<Item = Point>
    where
        Self: 'a;

    fn region(&self) -> &Region;

    /// Points with `x > x_from`, sorted by `x` (ties by `t`).
    fn scan_from(&self, x_from: f64) -> Self::Scan<'_>;
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return invalid(format!("rate must be positive, got {rate}"));
    }
    Ok(())
}

/// Lazily generated Poisson field. Yields exactly the points that
/// [`sample_field`] would store for the same `(seed, region, rate)`.
#[derive(Debug, Clone)]
pub struct FieldStream {
    seed: u64,
    region: Region,
    rate: f64,
}

impl FieldStream {
    pub fn new(seed: u64, region: Region, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(FieldStream { seed, region, rate })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn generator(&self) -> Generator {
        let height = self.region.t_max - self.region.t_min;
        Generator {
            rng: rng_from_seed(self.seed),
            x: self.region.x_min,
            x_max: self.region.x_max,
            t_min: self.region.t_min,
            height,
            inv_line_rate: 1.0 / (self.rate * height),
        }
    }
}

/// Sequential generator of points by exponential `x`-spacings.
#[derive(Debug, Clone)]
pub struct Generator {
    rng: ChaCha8Rng,
    x: f64,
    x_max: f64,
    t_min: f64,
    height: f64,
    inv_line_rate: f64,
}

impl Iterator for Generator {
    type Item = Point;

    #[inline]
    fn next(&mut self) -> Option<Point> {
        let gap: f64 = self.rng.sample(Exp1);
        let x = self.x + gap * self.inv_line_rate;
        if x > self.x_max {
            self.x = f64::INFINITY;
            return None;
        }
        self.x = x;
        let u: f64 = self.rng.sample(Open01);
        Some(Point::new(x, self.t_min + u * self.height))
    }
}

impl PointSource for FieldStream {
    type Scan<'a> = std::iter::SkipWhile<Generator, Box<dyn FnMut(&Point) -> bool>>;

    fn region(&self) -> &Region {
        &self.region
    }

    fn scan_from(&self, x_from: f64) -> Self::Scan<'_> {
        self.generator()
            .skip_while(Box::new(move |p: &Point| p.x <= x_from))
    }
}

/// A materialised Poisson realization, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField {
    seed: u64,
    region: Region,
    rate: f64,
    points: Vec<Point>,
}

/// Samples a rate-`rate` Poisson field on `region`, deterministic in `seed`.
pub fn sample_field(seed: u64, region: Region, rate: f64) -> Result<PointField> {
    let stream = FieldStream::new(seed, region, rate)?;
    let mut points: Vec<Point> = stream.generator().collect();
    // Already x-sorted; this only fixes the order of (probability zero) x ties.
    points.sort_by(cmp_xt);
    Ok(PointField {
        seed,
        region,
        rate,
        points,
    })
}

impl PointField {
    /// Builds a field from explicit points (tests, replays). Points must lie
    /// strictly inside `region`.
    pub fn from_points(seed: u64, region: Region, rate: f64, mut points: Vec<Point>) -> Result<Self> {
        check_rate(rate)?;
        let inside = |p: &Point| {
            region.x_min < p.x && p.x < region.x_max && region.t_min < p.t && p.t < region.t_max
        };
        if let Some(p) = points.iter().find(|p| !inside(p)) {
            return invalid(format!(
                "point ({}, {}) outside region {}",
                p.x,
                p.t,
                region.describe()
            ));
        }
        points.sort_by(cmp_xt);
        Ok(PointField {
            seed,
            region,
            rate,
            points,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the first point with `x > x_from`.
    pub fn first_after(&self, x_from: f64) -> usize {
        self.points.partition_point(|p| p.x <= x_from)
    }

    /// The points in `(x0, x1] x (t0, t1]`, sorted by `x`.
    pub fn points_in(&self, bx: &Rect) -> Result<Vec<Point>> {
        if !self.region.contains_rect(bx) {
            return Err(Error::OutOfCoverage {
                what: format!("({}, {}] x ({}, {}]", bx.x0, bx.x1, bx.t0, bx.t1),
                coverage: self.region.describe(),
            });
        }
        let lo = self.first_after(bx.x0);
        let hi = self.first_after(bx.x1);
        Ok(self.points[lo..hi]
            .iter()
            .filter(|p| bx.t0 < p.t && p.t <= bx.t1)
            .copied()
            .collect())
    }

    /// Writes the field as `x,t` rows with 15 significant digits, preceded by
    /// a `#` metadata line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let r = &self.region;
        writeln!(
            w,
            "# seed={} rate={:.14e} region={:.14e},{:.14e},{:.14e},{:.14e}",
            self.seed, self.rate, r.x_min, r.x_max, r.t_min, r.t_max
        )?;
        writeln!(w, "x,t")?;
        for p in &self.points {
            writeln!(w, "{:.14e},{:.14e}", p.x, p.t)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("field csv: {msg}"));
        let mut meta: Option<(u64, f64, Region)> = None;
        let mut points = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                meta = Some(parse_meta(rest).ok_or_else(|| bad(format!("line {}: bad metadata", lineno + 1)))?);
                continue;
            }
            if line.is_empty() || line == "x,t" {
                continue;
            }
            let (x, t) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("line {}: expected x,t", lineno + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))
            };
            points.push(Point::new(parse(x)?, parse(t)?));
        }
        let (seed, rate, region) = meta.ok_or_else(|| bad("missing metadata line".into()))?;
        PointField::from_points(seed, region, rate, points)
    }
}

fn parse_meta(s: &str) -> Option<(u64, f64, Region)> {
    let mut seed = None;
    let mut rate = None;
    let mut region = None;
    for tok in s.split_whitespace() {
        let (k, v) = tok.split_once('=')?;
        match k {
            "seed" => seed = v.parse().ok(),
            "rate" => rate = v.parse().ok(),
            "region" => {
                let c: Vec<f64> = v.split(',').filter_map(|c| c.parse().ok()).collect();
                if c.len() == 4 {
                    region = Region::new(c[0], c[1], c[2], c[3]).ok();
                }
            }
            _ => {}
        }
    }
    Some((seed?, rate?, region?))
}

impl PointSource for PointField {
    type Scan<'a> = std::iter::Copied<std::slice::Iter<'a, Point>>;

    fn region(&self) -> &Region {
        &self.region
    }

    fn scan_from(&self, x_from: f64) -> Self::Scan<'_> {
        self.points[self.first_after(x_from)..].iter().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_seed, Purpose};

    fn unit() -> Region {
        Region::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(Region::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Region::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Region::new(0.0, 1.0, -1.0, 1.0).is_err());
        assert!(sample_field(1, unit(), 0.0).is_err());
        assert!(sample_field(1, unit(), -2.0).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let a = sample_field(11, unit(), 1.0).unwrap();
        let b = sample_field(11, unit(), 1.0).unwrap();
        assert_eq!(a, b);
        let c = sample_field(12, Region::new(0.0, 5.0, 0.0, 5.0).unwrap(), 1.0).unwrap();
        let d = sample_field(12, Region::new(0.0, 5.0, 0.0, 5.0).unwrap(), 1.0).unwrap();
        assert_eq!(c.points(), d.points());
    }

    #[test]
    fn stream_matches_materialised() {
        let region = Region::new(-3.0, 7.0, 0.0, 4.0).unwrap();
        let f = sample_field(5, region, 2.5).unwrap();
        let s = FieldStream::new(5, region, 2.5).unwrap();
        let streamed: Vec<Point> = s.scan_from(region.x_min).collect();
        assert_eq!(streamed, f.points());
        let tail: Vec<Point> = s.scan_from(1.5).collect();
        assert_eq!(tail, f.scan_from(1.5).collect::<Vec<_>>());
    }

    #[test]
    fn points_sorted_and_inside() {
        let region = Region::new(-2.0, 2.0, 0.5, 3.0).unwrap();
        let f = sample_field(3, region, 10.0).unwrap();
        assert!(f.points().windows(2).all(|w| cmp_xt(&w[0], &w[1]).is_le()));
        assert!(f.points().iter().all(|p| region.x_min < p.x
            && p.x < region.x_max
            && region.t_min < p.t
            && p.t < region.t_max));
    }

    #[test]
    fn points_in_edge_cases() {
        let f = sample_field(9, unit(), 50.0).unwrap();
        let empty = Rect::new(0.3, 0.3, 0.0, 1.0).unwrap();
        assert!(f.points_in(&empty).unwrap().is_empty());
        assert_eq!(f.points_in(&unit().into()).unwrap(), f.points());
        let escaping = Rect::new(0.5, 1.5, 0.0, 1.0).unwrap();
        assert!(matches!(
            f.points_in(&escaping),
            Err(Error::OutOfCoverage { .. })
        ));
    }

    #[test]
    fn points_in_matches_linear_scan() {
        let region = Region::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let f = sample_field(21, region, 3.0).unwrap();
        let mut rng = rng_from_seed(stream_seed(21, 0, Purpose::Auxiliary));
        for _ in 0..100 {
            let (a, b): (f64, f64) = (rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0);
            let (c, d): (f64, f64) = (rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0);
            let bx = Rect::new(a.min(b), a.max(b), c.min(d), c.max(d)).unwrap();
            let brute: Vec<Point> = f.points().iter().filter(|p| bx.contains(p)).copied().collect();
            assert_eq!(f.points_in(&bx).unwrap(), brute);
        }
    }

    #[test]
    fn csv_round_trip() {
        let f = sample_field(4, Region::new(-1.0, 2.0, 0.0, 1.5).unwrap(), 4.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = PointField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g.len(), f.len());
        assert_eq!(g.seed(), f.seed());
        for (p, q) in f.points().iter().zip(g.points()) {
            assert!((p.x - q.x).abs() <= 1e-13 * p.x.abs().max(1.0));
            assert!((p.t - q.t).abs() <= 1e-13 * p.t.abs().max(1.0));
        }
    }
}
