use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{FreeSpaceManifold, MatchResult};
use crate::geometry::INTERVAL_SLACK;
use crate::network::OrdF64;

/// State index: `2 * interval + layer`, layer 1 once an edge was traversed.
type State = usize;

#[derive(Debug, Clone, Copy)]
struct Step {
    from: State,
    edge: usize,
}

pub(crate) struct Sweep {
    best: Vec<f64>,
    cost: Vec<f64>,
    pred: Vec<Option<Step>>,
    goal: Option<State>,
}

impl Sweep {
    fn backtrack(&self, mut state: State) -> Vec<usize> {
        let mut edges = Vec::new();
        while let Some(step) = self.pred[state] {
            edges.push(step.edge);
            state = step.from;
        }
        edges.reverse();
        edges
    }
}

type Key = Reverse<(OrdF64, OrdF64, usize, usize)>;

impl FreeSpaceManifold<'_> {
    /// Start states with their initial cost, the seed vertex's distance to
    /// the trajectory start.
    fn start_seeds(&self) -> Vec<(State, f64, f64)> {
        let p = self.traj.start();
        (0..self.intervals.len())
            .filter(|&g| self.is_start_interval(g))
            .map(|g| (2 * g, 1.0, self.net.pos(self.intervals[g].vertex).dist(p)))
            .collect()
    }

    /// Heads reachable over edge `e` from the suffix `[r, hi]` of tail
    /// interval `g`, as (head interval, lowest reachable parameter).
    pub(crate) fn cross(&self, e: usize, g: usize, r: f64, mut f: impl FnMut(usize, f64)) {
        let Some(p) = self.pointer(e, g) else { return };
        let lo = p.lo.max(r);
        if lo > p.hi + INTERVAL_SLACK {
            return;
        }
        for j in self.interval_range(self.net.edge(e).to) {
            let w = &self.intervals[j];
            if w.hi < lo - INTERVAL_SLACK {
                continue;
            }
            if w.lo > p.hi + INTERVAL_SLACK {
                break;
            }
            f(j, w.lo.max(lo).min(w.hi));
        }
    }

    /// Dijkstra-style sweep keyed by the lowest reachable parameter of each
    /// white interval. Among equally early arrivals the one with the lower
    /// accumulated closest-approach distance wins, then vertex id.
    ///
    /// With `stop_at_goal` a route is complete once it reaches parameter
    /// `l`; its cost then also includes the end vertex's distance to the
    /// trajectory end, so the chosen route hugs the trajectory at both ends.
    pub(crate) fn sweep(&self, seeds: &[(State, f64, f64)], stop_at_goal: bool) -> Sweep {
        let n = 2 * self.intervals.len();
        let terminal = n;
        let l = self.max_param();
        let end = self.traj.end();
        let mut sw = Sweep {
            best: vec![f64::INFINITY; n],
            cost: vec![f64::INFINITY; n],
            pred: vec![None; n],
            goal: None,
        };
        let mut heap: BinaryHeap<Key> = BinaryHeap::new();
        let key = |s: State, r: f64, c: f64| Reverse((OrdF64(r), OrdF64(c), self.intervals[s / 2].vertex, s));
        let better = |sw: &Sweep, s: State, r: f64, c: f64| (r, c) < (sw.best[s], sw.cost[s]);
        for &(s, r, c) in seeds {
            if better(&sw, s, r, c) {
                sw.best[s] = r;
                sw.cost[s] = c;
                heap.push(key(s, r, c));
            }
        }
        // Best finished route so far, as (cost, goal state).
        let mut done: Option<(f64, State)> = None;
        while let Some(Reverse((OrdF64(r), OrdF64(c), _, s))) = heap.pop() {
            if s == terminal {
                sw.goal = done.map(|d| d.1);
                return sw;
            }
            if (r, c) > (sw.best[s], sw.cost[s]) {
                continue;
            }
            let g = s / 2;
            let u = self.intervals[g].vertex;
            if stop_at_goal && s % 2 == 1 && self.is_goal_interval(g) {
                let total = c + self.net.pos(u).dist(end);
                if done.is_none_or(|d| total < d.0) {
                    done = Some((total, s));
                    heap.push(Reverse((OrdF64(l.max(r)), OrdF64(total), usize::MAX, terminal)));
                }
            }
            for e in self.corridor_out_edges(u) {
                self.cross(e, g, r, |j, rj| {
                    let t = 2 * j + 1;
                    let cj = c + self.near(j);
                    if better(&sw, t, rj, cj) {
                        sw.best[t] = rj;
                        sw.cost[t] = cj;
                        sw.pred[t] = Some(Step { from: s, edge: e });
                        heap.push(key(t, rj, cj));
                    }
                });
            }
        }
        sw.goal = done.map(|d| d.1);
        sw
    }

    fn result(&self, route: Vec<usize>) -> MatchResult {
        MatchResult {
            route,
            entry: 1.0,
            exit: self.max_param(),
        }
    }
}

/// Decides whether some network route lies within Fréchet distance `eps`
/// of the trajectory and returns the first one found.
pub fn match_decision(m: &FreeSpaceManifold) -> Option<MatchResult> {
    let sw = m.sweep(&m.start_seeds(), true);
    sw.goal.map(|g| m.result(sw.backtrack(g)))
}

/// Like [`match_decision`] but the route must traverse edge `e`.
pub fn match_through_edge(m: &FreeSpaceManifold, e: usize) -> Option<MatchResult> {
    if !m.corridor.contains_edge(e) {
        return None;
    }
    let prefix = m.sweep(&m.start_seeds(), false);
    let u = m.net.edge(e).from;
    let mut tails: Vec<(f64, f64, State)> = m
        .interval_range(u)
        .filter_map(|g| {
            let (s0, s1) = (2 * g, 2 * g + 1);
            let key = |s: State| (prefix.best[s], prefix.cost[s]);
            let s = if key(s0) <= key(s1) { s0 } else { s1 };
            prefix.best[s].is_finite().then_some((prefix.best[s], prefix.cost[s], s))
        })
        .collect();
    tails.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (r, c, s) in tails {
        let mut seeds = Vec::new();
        m.cross(e, s / 2, r, |j, rj| seeds.push((2 * j + 1, rj, c + m.near(j))));
        if seeds.is_empty() {
            continue;
        }
        let suffix = m.sweep(&seeds, true);
        if let Some(goal) = suffix.goal {
            let mut route = prefix.backtrack(s);
            route.push(e);
            route.extend(suffix.backtrack(goal));
            return Some(m.result(route));
        }
    }
    None
}

#[cfg(test)]
pub(crate) mod tests {
    use super::super::build_manifold;
    use super::super::tests::line;
    use super::*;
    use crate::geometry::frechet_decision;
    use crate::network::fixtures::{f1, f2};
    use crate::network::RoadNetwork;
    use crate::Trajectory;

    pub(crate) fn route_ok(net: &RoadNetwork, t: &Trajectory, route: &[usize], eps: f64) -> bool {
        let mut pts = vec![net.pos(net.edge(route[0]).from)];
        for w in route.windows(2) {
            assert_eq!(net.edge(w[0]).to, net.edge(w[1]).from);
        }
        pts.extend(route.iter().map(|&e| net.pos(net.edge(e).to)));
        frechet_decision(&pts, t.points(), eps * (1.0 + 1e-9))
    }

    #[test]
    fn f2_named_routes_feasible() {
        let net = f2();
        let t = line(&[(0.0, 0.0), (200.0, 0.0)]);
        assert!(route_ok(&net, &t, &[0, 1], 100.0));
        assert!(route_ok(&net, &t, &[2, 3], 100.0));
        assert!(!route_ok(&net, &t, &[2, 3], 50.0));
    }

    #[test]
    fn f1_decision() {
        let net = f1();
        let t = line(&[(0.0, 0.0), (200.0, 0.0)]);
        let m = build_manifold(&net, &t, 10.0).unwrap();
        assert_eq!(match_decision(&m).unwrap().route, vec![0, 1]);
        assert_eq!(match_through_edge(&m, 1).unwrap().route, vec![0, 1]);
    }

    #[test]
    fn f1_vertical_absent() {
        let net = f1();
        let t = line(&[(0.0, 0.0), (0.0, 200.0)]);
        let m = build_manifold(&net, &t, 10.0).unwrap();
        assert!(match_decision(&m).is_none());
    }

    #[test]
    fn f2_both_routes_feasible() {
        let net = f2();
        let t = line(&[(0.0, 0.0), (200.0, 0.0)]);
        let m = build_manifold(&net, &t, 100.0).unwrap();
        // v1 is exactly 100 from both ends, so shorter routes also qualify.
        let r = match_decision(&m).unwrap();
        assert!(route_ok(&net, &t, &r.route, 100.0));
        assert_eq!(match_through_edge(&m, 2).unwrap().route, vec![2, 3]);
    }

    #[test]
    fn f2_through_detour_absent_at_50() {
        let net = f2();
        let t = line(&[(0.0, 0.0), (200.0, 0.0)]);
        let m = build_manifold(&net, &t, 50.0).unwrap();
        assert!(match_through_edge(&m, 2).is_none());
        assert_eq!(match_through_edge(&m, 0).unwrap().route, vec![0, 1]);
    }

    #[test]
    fn wide_radius_still_returns_the_traced_route() {
        // Parallel streets 100 apart are feasible at eps 150; the traced one
        // should win, including both end vertices.
        let net = crate::datagen::grid_network(4, 4, 100.0);
        let id = |r: usize, c: usize| net.vertex_index(&format!("v{r:03}_{c:03}")).unwrap();
        let path = [id(1, 0), id(1, 1), id(1, 2), id(2, 2), id(2, 3)];
        let edges: Vec<usize> = path
            .windows(2)
            .map(|w| *net.out_edges(w[0]).iter().find(|&&e| net.edge(e).to == w[1]).unwrap())
            .collect();
        let t = Trajectory::new("t", path.iter().map(|&v| net.pos(v)).collect()).unwrap();
        let m = build_manifold(&net, &t, 150.0).unwrap();
        assert_eq!(match_decision(&m).unwrap().route, edges);
        assert_eq!(match_through_edge(&m, edges[2]).unwrap().route, edges);
    }

    #[test]
    fn loop_is_needed_for_backtracking_trajectory() {
        // Out and back along the same street pair.
        let net = RoadNetwork::new(
            vec![
                crate::network::Vertex::new("a", 0.0, 0.0),
                crate::network::Vertex::new("b", 100.0, 0.0),
            ],
            vec![
                crate::network::EdgeSpec::new("ab", "a", "b"),
                crate::network::EdgeSpec::new("ba", "b", "a"),
            ],
        )
        .unwrap();
        let t = line(&[(0.0, 1.0), (100.0, 1.0), (0.0, -1.0)]);
        let m = build_manifold(&net, &t, 5.0).unwrap();
        let r = match_decision(&m).unwrap();
        assert_eq!(r.route, vec![0, 1]);
        assert!(route_ok(&net, &t, &r.route, 5.0));
    }
}
