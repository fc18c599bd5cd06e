//! Map matching under the strong Fréchet distance on a free-space manifold.
//!
//! For a trajectory `T` on `[1, l]` and radius `eps`, every corridor vertex
//! `v` gets its white intervals `FD(v)`: the maximal parameter ranges where
//! `v` is within `eps` of `T`. For every corridor edge `(u, v)` and white
//! interval `I` at `u`, the left-right pointer is the range of parameters at
//! `v` reachable from `I` by a monotone path through the edge's free-space
//! strip. The reachable part of a white interval is always a suffix
//! `[r, I.hi]`, so the sweep only needs the lowest reachable parameter `r`
//! per interval; reach from `[r, I.hi]` equals the pointer clipped to
//! `[r, l]`, and every free parameter at `v` inside that range is reachable.

mod extend;
mod sweep;
mod weighted;

use crate::geometry::{point_segment_distance, segment_disk, FreeInterval, Point, Trajectory, INTERVAL_SLACK};
use crate::network::{corridor, CorridorSubgraph, RoadNetwork};

pub use extend::extend_endpoints;
pub use sweep::{match_decision, match_through_edge};
pub use weighted::{match_weighted, match_weighted_with, WeightedMatch, WeightedOptions, WeightTuple};

type Span = Option<(f64, f64)>;

/// A white interval `FD(v)` entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteInterval {
    pub vertex: usize,
    pub lo: f64,
    pub hi: f64,
}

impl WhiteInterval {
    pub fn as_interval(&self) -> FreeInterval {
        FreeInterval::new(self.lo, self.hi)
    }
}

/// Reachable parameter range at the head of an edge from one white interval
/// at its tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeftRightPointer {
    pub lo: f64,
    pub hi: f64,
}

/// A matched route: edge indices whose head-to-tail chain is within Fréchet
/// distance `eps` of the trajectory, entered at `entry` and left at `exit`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub route: Vec<usize>,
    pub entry: f64,
    pub exit: f64,
}

impl MatchResult {
    pub fn start_vertex(&self, net: &RoadNetwork) -> usize {
        net.edge(self.route[0]).from
    }

    pub fn end_vertex(&self, net: &RoadNetwork) -> usize {
        net.edge(*self.route.last().expect("non-empty route")).to
    }
}

pub struct FreeSpaceManifold<'a> {
    net: &'a RoadNetwork,
    traj: &'a Trajectory,
    eps: f64,
    corridor: CorridorSubgraph,
    intervals: Vec<WhiteInterval>,
    /// Per network vertex, the range of `intervals` belonging to it.
    ranges: Vec<(usize, usize)>,
    /// Per network edge, pointers aligned with the tail's white intervals.
    pointers: Vec<Vec<Option<LeftRightPointer>>>,
    /// Per interval, closest approach of its vertex to the trajectory within it.
    near: Vec<f64>,
}

impl<'a> FreeSpaceManifold<'a> {
    pub fn net(&self) -> &'a RoadNetwork {
        self.net
    }

    pub fn trajectory(&self) -> &'a Trajectory {
        self.traj
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn corridor(&self) -> &CorridorSubgraph {
        &self.corridor
    }

    pub fn intervals(&self) -> &[WhiteInterval] {
        &self.intervals
    }

    /// White intervals `FD(v)`, sorted by `lo`; empty outside the corridor.
    pub fn white_intervals(&self, v: usize) -> &[WhiteInterval] {
        let (a, b) = self.ranges[v];
        &self.intervals[a..b]
    }

    pub fn pointer(&self, e: usize, tail_interval: usize) -> Option<LeftRightPointer> {
        let tail = self.net.edge(e).from;
        let local = tail_interval - self.ranges[tail].0;
        self.pointers[e].get(local).copied().flatten()
    }

    pub(crate) fn interval_range(&self, v: usize) -> std::ops::Range<usize> {
        let (a, b) = self.ranges[v];
        a..b
    }

    pub(crate) fn corridor_out_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.net
            .out_edges(v)
            .iter()
            .copied()
            .filter(|&e| self.corridor.contains_edge(e))
    }

    pub(crate) fn max_param(&self) -> f64 {
        self.traj.max_param()
    }

    pub(crate) fn is_goal_interval(&self, g: usize) -> bool {
        self.intervals[g].hi >= self.max_param() - INTERVAL_SLACK
    }

    pub(crate) fn near(&self, g: usize) -> f64 {
        self.near[g]
    }

    pub(crate) fn is_start_interval(&self, g: usize) -> bool {
        self.intervals[g].lo <= 1.0 + INTERVAL_SLACK
    }
}

/// Builds the free-space manifold of `traj` over the `eps`-corridor of `net`.
/// Returns `None` when no white interval exists ("no coverage").
pub fn build_manifold<'a>(
    net: &'a RoadNetwork,
    traj: &'a Trajectory,
    eps: f64,
) -> Option<FreeSpaceManifold<'a>> {
    assert!(eps > 0.0, "matching radius must be positive");
    let corridor = corridor(net, traj, eps)?;
    let pts = traj.points();
    let cells = pts.len() - 1;

    // Raw per-segment free spans of each corridor vertex (local parameter).
    let mut raw: Vec<Vec<Span>> = vec![Vec::new(); net.vertex_count()];
    let mut intervals = Vec::new();
    let mut ranges = vec![(0, 0); net.vertex_count()];
    for &v in &corridor.vertices {
        let p = net.pos(v);
        let spans: Vec<Span> = pts.windows(2).map(|w| segment_disk(w[0], w[1], p, eps)).collect();
        let start = intervals.len();
        for (k, span) in spans.iter().enumerate() {
            let Some((a, b)) = *span else { continue };
            let base = (k + 1) as f64;
            let (lo, hi) = (base + a, base + b);
            let merge = intervals.len() > start
                && intervals.last().is_some_and(|w: &WhiteInterval| w.hi >= lo - INTERVAL_SLACK);
            if merge {
                let last = intervals.last_mut().expect("checked above");
                last.hi = last.hi.max(hi);
            } else {
                intervals.push(WhiteInterval { vertex: v, lo, hi });
            }
        }
        ranges[v] = (start, intervals.len());
        raw[v] = spans;
    }
    if intervals.is_empty() {
        return None;
    }

    let mut pointers = vec![Vec::new(); net.edge_count()];
    for &e in &corridor.edges {
        let edge = net.edge(e);
        let (a, b) = net.segment(e);
        let vertex_spans: Vec<Span> = pts.iter().map(|&p| segment_disk(a, b, p, eps)).collect();
        let (s, t) = ranges[edge.from];
        pointers[e] = intervals[s..t]
            .iter()
            .map(|iv| strip_pointer(iv, &raw[edge.to], &vertex_spans, cells))
            .collect();
    }

    let near = intervals.iter().map(|w| closest_approach(traj, net.pos(w.vertex), w.lo, w.hi)).collect();

    Some(FreeSpaceManifold {
        net,
        traj,
        eps,
        corridor,
        intervals,
        ranges,
        pointers,
        near,
    })
}

fn closest_approach(traj: &Trajectory, p: Point, lo: f64, hi: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut a = lo;
    while a < hi {
        let b = (a.floor() + 1.0).min(hi);
        best = best.min(point_segment_distance(p, traj.at(a), traj.at(b)));
        a = b;
    }
    best.min(p.dist(traj.at(hi)))
}

fn clip_from(span: Span, from: f64) -> Span {
    let (lo, hi) = span?;
    if hi < from - INTERVAL_SLACK {
        return None;
    }
    let lo = lo.max(from);
    Some((lo, hi.max(lo)))
}

/// Monotone reachability across one edge strip.
///
/// `head_spans[k]` is the free span of the head vertex against trajectory
/// segment `k` (local parameter), `vertex_spans[k]` the free span of
/// trajectory vertex `k` along the edge.
fn strip_pointer(
    start: &WhiteInterval,
    head_spans: &[Span],
    vertex_spans: &[Span],
    cells: usize,
) -> Option<LeftRightPointer> {
    let k0 = ((start.lo - 1.0).floor().max(0.0) as usize).min(cells - 1);
    let mut bottom: Span = None;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in k0..cells {
        let base = (k + 1) as f64;
        let left = (start.hi >= base - INTERVAL_SLACK && start.lo <= base + 1.0 + INTERVAL_SLACK)
            .then(|| {
                let l = start.lo.max(base);
                (l, start.hi.min(base + 1.0).max(l))
            });
        if left.is_none() && bottom.is_none() {
            break;
        }
        let right = head_spans[k].map(|(a, b)| (base + a, base + b));
        let right = match (bottom, left) {
            (Some(_), _) => right,
            (None, Some((l, _))) => clip_from(right, l),
            (None, None) => None,
        };
        if let Some((a, b)) = right {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        let top = vertex_spans[k + 1];
        bottom = match (left, bottom) {
            (Some(_), _) => top,
            (None, Some((s, _))) => clip_from(top, s),
            (None, None) => None,
        };
    }
    (lo <= hi).then_some(LeftRightPointer { lo, hi })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::network::fixtures::{f1, f2};

    pub fn line(pts: &[(f64, f64)]) -> Trajectory {
        Trajectory::new("t", pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn white_intervals_on_f1() {
        let net = f1();
        let t = line(&[(0.0, 0.0), (200.0, 0.0)]);
        let m = build_manifold(&net, &t, 10.0).unwrap();
        let fd = |v| m.white_intervals(v).iter().map(|w| (w.lo, w.hi)).collect::<Vec<_>>();
        let expect = [(1.0, 1.05), (1.45, 1.55), (1.95, 2.0)];
        for (v, (lo, hi)) in expect.iter().enumerate() {
            let got = fd(v);
            assert_eq!(got.len(), 1);
            assert!(close(got[0].0, *lo) && close(got[0].1, *hi), "v{v}: {got:?}");
        }
    }

    #[test]
    fn detour_vertex_has_no_white_interval() {
        let net = f2();
        let t = line(&[(0.0, 0.0), (200.0, 0.0)]);
        let m = build_manifold(&net, &t, 50.0).unwrap();
        assert!(m.white_intervals(3).is_empty());
    }

    #[test]
    fn tiny_radius_is_no_coverage() {
        let net = f2();
        let t = line(&[(0.0, 30.0), (200.0, 30.0)]);
        assert!(build_manifold(&net, &t, 1.0).is_none());
    }

    #[test]
    fn pointer_stays_within_suffix() {
        let net = f1();
        let t = line(&[(0.0, 0.0), (200.0, 0.0)]);
        let m = build_manifold(&net, &t, 10.0).unwrap();
        for e in 0..net.edge_count() {
            let tail = net.edge(e).from;
            for g in m.interval_range(tail) {
                if let Some(p) = m.pointer(e, g) {
                    assert!(p.lo >= m.intervals()[g].lo - 1e-12);
                    assert!(p.hi <= m.max_param() + 1e-12);
                }
            }
        }
        // e0 from FD(v0)=[1,1.05] reaches FD(v1) from 1.45 on.
        let p = m.pointer(0, 0).unwrap();
        assert!(close(p.lo, 1.45) && close(p.hi, 1.55));
    }

    #[test]
    fn wiggly_trajectory_pointer_spans_cells() {
        // Trajectory doubles back over the edge; the head is reached twice.
        let net = f1();
        let t = line(&[(0.0, 0.0), (110.0, 0.0), (90.0, 5.0), (200.0, 0.0)]);
        let m = build_manifold(&net, &t, 12.0).unwrap();
        let v1 = m.white_intervals(1);
        assert_eq!(v1.len(), 1, "{v1:?}");
        let p = m.pointer(0, 0).unwrap();
        assert!(p.lo < 2.0 && p.hi > 3.0, "{p:?}");
    }
}
