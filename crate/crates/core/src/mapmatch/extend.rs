use super::MatchResult;
use crate::geometry::Trajectory;
use crate::network::{ResidualField, RoadNetwork};

fn average(route: &[usize], r: &ResidualField) -> f64 {
    route.iter().map(|&e| r.get(e)).sum::<f64>() / route.len() as f64
}

/// Best edge by residual (ties to the lowest index) among `candidates`
/// whose far endpoint is new and within `eps` of `anchor`.
fn pick(
    net: &RoadNetwork,
    candidates: &[usize],
    far: impl Fn(usize) -> usize,
    anchor: crate::geometry::Point,
    eps: f64,
    on_route: &[bool],
    floor: f64,
    r: &ResidualField,
) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &e in candidates {
        let w = far(e);
        if on_route[w] || net.pos(w).dist(anchor) > eps || r.get(e) < floor {
            continue;
        }
        if best.is_none_or(|b| r.get(e) > r.get(b) || (r.get(e) == r.get(b) && e < b)) {
            best = Some(e);
        }
    }
    best
}

/// Greedily grows the route at both ends with edges near the trajectory's
/// endpoints that do not lower the route's average residual and do not
/// revisit a route vertex.
pub fn extend_endpoints(
    p: &MatchResult,
    t: &Trajectory,
    eps: f64,
    r: &ResidualField,
    net: &RoadNetwork,
) -> MatchResult {
    assert!(!p.route.is_empty(), "route must be non-empty");
    let mut on_route = vec![false; net.vertex_count()];
    on_route[net.edge(p.route[0]).from] = true;
    for &e in &p.route {
        on_route[net.edge(e).to] = true;
    }
    let mut head = Vec::new();
    let mut route = p.route.clone();
    let mut sum: f64 = route.iter().map(|&e| r.get(e)).sum();
    let mut len = route.len();

    let mut start = net.edge(route[0]).from;
    while let Some(e) = pick(net, net.in_edges(start), |e| net.edge(e).from, t.start(), eps, &on_route, sum / len as f64, r) {
        head.push(e);
        start = net.edge(e).from;
        on_route[start] = true;
        sum += r.get(e);
        len += 1;
    }
    let mut end = net.edge(*route.last().unwrap()).to;
    while let Some(e) = pick(net, net.out_edges(end), |e| net.edge(e).to, t.end(), eps, &on_route, sum / len as f64, r) {
        route.push(e);
        end = net.edge(e).to;
        on_route[end] = true;
        sum += r.get(e);
        len += 1;
    }
    head.reverse();
    head.extend(route);
    debug_assert!(average(&head, r) >= average(&p.route, r) - 1e-9 * average(&p.route, r).abs().max(1.0));
    MatchResult {
        route: head,
        entry: p.entry,
        exit: p.exit,
    }
}
