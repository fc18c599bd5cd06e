//! Planar polyline primitives and free-space computations.
//!
//! Trajectories are parameterized on `[1, l]` where `l` is the number of
//! (deduplicated) measurements: for `tau` in `[i, i + 1]` the curve runs
//! linearly from measurement `i` to measurement `i + 1` (1-based).

mod frechet;
mod io;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use frechet::{densify, discrete_frechet, frechet_decision, frechet_value, DEFAULT_REL_TOL};
pub use io::{load_trajectories, write_trajectories};

/// Absolute slack for comparisons between free-interval endpoints.
pub const INTERVAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm2().sqrt()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// A closed interval of curve parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FreeInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        FreeInterval { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo - INTERVAL_SLACK && t <= self.hi + INTERVAL_SLACK
    }
}

/// Parameter range `[lo, hi] ⊆ [0, 1]` of segment `a→b` within distance `eps`
/// of `center`, or `None` if the segment misses the disk.
pub fn segment_disk(a: Point, b: Point, center: Point, eps: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let len2 = d.norm2();
    let eps2 = eps * eps;
    let tol = 1e-12 * eps2.max(1.0);
    if len2 == 0.0 {
        return ((center - a).norm2() <= eps2 + tol).then_some((0.0, 1.0));
    }
    let t0 = (center - a).dot(d) / len2;
    let h2 = (center - a.lerp(b, t0)).norm2();
    let slack = eps2 - h2;
    if slack < -tol {
        return None;
    }
    let w = (slack.max(0.0) / len2).sqrt();
    let (t1, t2) = (t0 - w, t0 + w);
    if t1 > 1.0 + INTERVAL_SLACK || t2 < -INTERVAL_SLACK {
        return None;
    }
    let lo = t1.clamp(0.0, 1.0);
    let hi = t2.clamp(0.0, 1.0);
    Some((lo, hi.max(lo)))
}

/// Euclidean distance from `p` to segment `a→b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len2 = d.norm2();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

/// Distance from `p` to the polyline through `pts`.
pub fn point_polyline_distance(p: Point, pts: &[Point]) -> f64 {
    match pts {
        [] => f64::INFINITY,
        [q] => p.dist(*q),
        _ => pts
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Removes consecutive exact duplicates.
pub fn dedup_points(pts: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Maximal intervals `{tau : |T(tau) - p| <= eps}` over the trajectory
/// parameter range, sorted by `lo`. Touching intervals are merged.
pub fn point_free_intervals(p: Point, traj: &Trajectory, eps: f64) -> Vec<FreeInterval> {
    polyline_free_intervals(p, traj.points(), eps)
}

pub(crate) fn polyline_free_intervals(p: Point, pts: &[Point], eps: f64) -> Vec<FreeInterval> {
    let mut out: Vec<FreeInterval> = Vec::new();
    for (k, w) in pts.windows(2).enumerate() {
        let Some((a, b)) = segment_disk(w[0], w[1], p, eps) else {
            continue;
        };
        let base = (k + 1) as f64;
        let iv = FreeInterval::new(base + a, base + b);
        match out.last_mut() {
            Some(last) if last.hi >= iv.lo - INTERVAL_SLACK => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

/// An ordered sequence of planar measurements with optional timestamps.
///
/// Consecutive spatial duplicates are collapsed on construction, so every
/// segment has positive length. At least two distinct positions are required.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: String,
    points: Vec<Point>,
    times: Vec<Option<f64>>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::with_times(id, points.into_iter().zip(std::iter::repeat_n(None, n)))
    }

    pub fn with_times(
        id: impl Into<String>,
        samples: impl IntoIterator<Item = (Point, Option<f64>)>,
    ) -> Result<Self> {
        let id = id.into();
        let mut points: Vec<Point> = Vec::new();
        let mut times: Vec<Option<f64>> = Vec::new();
        let mut last_time: Option<f64> = None;
        for (p, t) in samples {
            if !p.is_finite() {
                return Err(Error::invalid(format!("trajectory {id}: non-finite coordinate")));
            }
            if let Some(t) = t {
                if !t.is_finite() || last_time.is_some_and(|lt| t < lt) {
                    return Err(Error::invalid(format!(
                        "trajectory {id}: timestamps must be finite and non-decreasing"
                    )));
                }
                last_time = Some(t);
            }
            if points.last() == Some(&p) {
                continue;
            }
            points.push(p);
            times.push(t);
        }
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "trajectory {id}: needs at least two distinct positions"
            )));
        }
        Ok(Trajectory { id, points, times })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn times(&self) -> &[Option<f64>] {
        &self.times
    }

    /// Number of measurements `l`; the parameter range is `[1, l]`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    pub fn max_param(&self) -> f64 {
        self.points.len() as f64
    }

    /// Position at parameter `tau ∈ [1, l]`.
    pub fn at(&self, tau: f64) -> Point {
        let l = self.points.len();
        let tau = tau.clamp(1.0, l as f64);
        let k = ((tau - 1.0).floor() as usize).min(l - 2);
        self.points[k].lerp(self.points[k + 1], tau - 1.0 - k as f64)
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        point_polyline_distance(p, &self.points)
    }
}
