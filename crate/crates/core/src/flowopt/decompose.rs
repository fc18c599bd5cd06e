use super::{EdgeFlow, PathCycleDecomposition, TerminalSpec};
use crate::error::{Error, Result};
use crate::network::RoadNetwork;

/// Peels source-to-sink paths, then cycles, off a conserving flow.
///
/// Values below `1e-12 * max(1, max flow)` count as zero.
pub fn decompose(net: &RoadNetwork, flow: &EdgeFlow, terminals: &TerminalSpec) -> Result<PathCycleDecomposition> {
    if flow.values.len() != net.edge_count() {
        return Err(Error::invalid("edge flow does not match the network"));
    }
    if let Some(v) = flow.values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("edge flow value {v} is not a nonnegative number")));
    }
    let peak = flow.values.iter().fold(1.0f64, |a, &b| a.max(b));
    let snap = 1e-12 * peak;
    let violation = flow.conservation_violation(net, terminals);
    if violation > 1e-6 * peak {
        return Err(Error::invalid(format!("flow violates conservation by {violation:.3e}")));
    }

    let mut g: Vec<f64> = flow.values.iter().map(|&v| if v <= snap { 0.0 } else { v }).collect();
    let mut balance = EdgeFlow { values: g.clone() }.balance(net);
    let is_sink = |v: usize| terminals.sinks.binary_search(&v).is_ok();
    let mut out = PathCycleDecomposition::default();
    let mut position = vec![usize::MAX; net.vertex_count()];

    let next_edge = |g: &[f64], v: usize| net.out_edges(v).iter().copied().find(|&e| g[e] > 0.0);

    // Paths from sources with positive excess.
    for &s in &terminals.sources {
        while balance[s] > snap {
            let Some(first) = next_edge(&g, s) else { break };
            // Walk until a sink with positive deficit or a repeated vertex.
            let mut walk_vertices = vec![s];
            let mut walk_edges: Vec<usize> = Vec::new();
            position[s] = 0;
            let mut e = first;
            let outcome = loop {
                walk_edges.push(e);
                let v = net.edge(e).to;
                if position[v] != usize::MAX {
                    break Some((false, position[v]));
                }
                position[v] = walk_vertices.len();
                walk_vertices.push(v);
                if is_sink(v) && balance[v] < -snap {
                    break Some((true, 0));
                }
                match next_edge(&g, v) {
                    Some(n) => e = n,
                    None => break None,
                }
            };
            for &v in &walk_vertices {
                position[v] = usize::MAX;
            }
            match outcome {
                Some((true, _)) => {
                    let t = *walk_vertices.last().unwrap();
                    let value = walk_edges
                        .iter()
                        .map(|&e| g[e])
                        .fold(balance[s].min(-balance[t]), f64::min);
                    peel(&mut g, &walk_edges, value, snap);
                    balance[s] -= value;
                    balance[t] += value;
                    out.paths.push((walk_edges, value));
                }
                Some((false, at)) => {
                    let cycle = walk_edges[at..].to_vec();
                    let value = cycle.iter().map(|&e| g[e]).fold(f64::INFINITY, f64::min);
                    peel(&mut g, &cycle, value, snap);
                    out.cycles.push((cycle, value));
                }
                None => {
                    // Only reachable through sub-tolerance imbalance.
                    let last = *walk_edges.last().unwrap();
                    balance[net.edge(last).from] -= g[last];
                    balance[net.edge(last).to] += g[last];
                    g[last] = 0.0;
                }
            }
        }
    }

    // What remains circulates.
    for start in 0..net.edge_count() {
        while g[start] > 0.0 {
            let mut walk_vertices = vec![net.edge(start).from];
            let mut walk_edges = Vec::new();
            position[walk_vertices[0]] = 0;
            let mut e = start;
            let at = loop {
                walk_edges.push(e);
                let v = net.edge(e).to;
                if position[v] != usize::MAX {
                    break Some(position[v]);
                }
                position[v] = walk_vertices.len();
                walk_vertices.push(v);
                match next_edge(&g, v) {
                    Some(n) => e = n,
                    None => break None,
                }
            };
            for &v in &walk_vertices {
                position[v] = usize::MAX;
            }
            match at {
                Some(at) => {
                    let cycle = walk_edges[at..].to_vec();
                    let value = cycle.iter().map(|&e| g[e]).fold(f64::INFINITY, f64::min);
                    peel(&mut g, &cycle, value, snap);
                    out.cycles.push((cycle, value));
                }
                None => {
                    let last = *walk_edges.last().unwrap();
                    if g[last] > 1e-6 * peak {
                        return Err(Error::invalid("flow left after path extraction does not circulate"));
                    }
                    g[last] = 0.0;
                }
            }
        }
    }
    Ok(out)
}

fn peel(g: &mut [f64], edges: &[usize], value: f64, snap: f64) {
    for &e in edges {
        g[e] -= value;
        if g[e] <= snap {
            g[e] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::triangle;
    use super::*;
    use crate::network::fixtures::f2;

    #[test]
    fn path_plus_cycle() {
        let net = triangle();
        let f = EdgeFlow { values: vec![2.0, 2.0, 1.0] };
        let d = decompose(&net, &f, &TerminalSpec::new(vec![0], vec![2])).unwrap();
        assert_eq!(d.paths, vec![(vec![0, 1], 1.0)]);
        assert_eq!(d.cycles.len(), 1);
        assert_eq!(d.cycles[0].1, 1.0);
        assert_eq!(d.edge_flow(3), f);
    }

    #[test]
    fn acyclic_and_zero() {
        let net = f2();
        let f = EdgeFlow { values: vec![2.0, 2.0, 1.0, 1.0] };
        let d = decompose(&net, &f, &TerminalSpec::new(vec![0], vec![2])).unwrap();
        assert!(d.cycles.is_empty());
        assert_eq!(d.paths.len(), 2);
        assert_eq!(d.edge_flow(4), f);
        let z = decompose(&net, &EdgeFlow::zeros(4), &TerminalSpec::new(vec![0], vec![2])).unwrap();
        assert_eq!(z.piece_count(), 0);
    }

    #[test]
    fn rejects_non_conserving_flow() {
        let net = f2();
        let f = EdgeFlow { values: vec![3.0, 1.0, 0.0, 0.0] };
        assert!(decompose(&net, &f, &TerminalSpec::new(vec![0], vec![2])).is_err());
    }
}
