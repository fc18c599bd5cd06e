use serde::Serialize;

use super::PathCycleDecomposition;
use crate::network::RoadNetwork;
use crate::reconstruct::{prune, Reconstruction, Route};

#[derive(Debug, Clone)]
pub struct MergeOutput {
    pub reconstruction: Reconstruction,
    pub stats: MergeStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MergeStats {
    pub merged_cycles: usize,
    pub dropped_cycles: usize,
    /// Sum over dropped cycles of value times edge count.
    pub dropped_mass: f64,
    /// Extra flow, value times edge count, from rounding traversal counts up.
    pub rounding_excess: f64,
}

fn vertices(net: &RoadNetwork, edges: &[usize]) -> Vec<usize> {
    let mut v = vec![net.edge(edges[0]).from];
    v.extend(edges.iter().map(|&e| net.edge(e).to));
    v
}

/// Path with `times` copies of `cycle` inserted at the first path vertex
/// the cycle visits.
fn splice(net: &RoadNetwork, path: &[usize], cycle: &[usize], times: usize) -> Option<Vec<usize>> {
    let pv = vertices(net, path);
    let cv = &vertices(net, cycle)[..cycle.len()];
    let (i, j) = pv.iter().enumerate().find_map(|(i, v)| cv.iter().position(|w| w == v).map(|j| (i, j)))?;
    let rotated: Vec<usize> = cycle[j..].iter().chain(&cycle[..j]).copied().collect();
    let mut out = path[..i].to_vec();
    for _ in 0..times {
        out.extend_from_slice(&rotated);
    }
    out.extend_from_slice(&path[i..]);
    Some(out)
}

/// Turns path flows into routes and folds each cycle into the
/// largest-valued path flow that touches it.
pub fn merge_cycles(net: &RoadNetwork, d: &PathCycleDecomposition, source: Option<&str>) -> MergeOutput {
    let mut paths: Vec<(Vec<usize>, f64)> = d.paths.iter().filter(|p| p.1 > 0.0).cloned().collect();
    let mut stats = MergeStats::default();
    for (cycle, c) in d.cycles.iter().filter(|c| c.1 > 0.0) {
        let cv = vertices(net, cycle);
        let partner = paths
            .iter()
            .enumerate()
            .filter(|(_, (p, v))| *v > 0.0 && vertices(net, p).iter().any(|x| cv.contains(x)))
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        let Some(i) = partner else {
            stats.dropped_cycles += 1;
            stats.dropped_mass += c * cycle.len() as f64;
            continue;
        };
        let p = paths[i].1;
        stats.merged_cycles += 1;
        if p >= *c {
            let merged = splice(net, &paths[i].0, cycle, 1).expect("shares a vertex");
            paths[i].1 = p - c;
            paths.push((merged, *c));
        } else {
            let times = (c / p - 1e-12).ceil().max(1.0) as usize;
            stats.rounding_excess += (times as f64 * p - c) * cycle.len() as f64;
            paths[i].0 = splice(net, &paths[i].0, cycle, times).expect("shares a vertex");
        }
    }
    let mut rec = Reconstruction::new();
    for (edges, v) in paths {
        if v > 0.0 {
            let route = Route::new(net, edges).expect("decomposition pieces are connected");
            rec.push(route, v, source.map(str::to_owned));
        }
    }
    MergeOutput {
        reconstruction: prune(&rec, 0.0),
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::triangle;
    use super::*;
    use crate::reconstruct::reconstructed_flow;

    #[test]
    fn no_cycles_is_verbatim() {
        let net = triangle();
        let d = PathCycleDecomposition { paths: vec![(vec![0, 1], 2.0)], cycles: vec![] };
        let m = merge_cycles(&net, &d, None);
        assert_eq!(m.reconstruction.routes()[0].edges(), &[0, 1]);
        assert_eq!(m.reconstruction.coefficients(), &[2.0]);
    }

    #[test]
    fn equal_values_merge_into_one_route() {
        let net = triangle();
        let d = PathCycleDecomposition {
            paths: vec![(vec![0, 1], 1.0)],
            cycles: vec![(vec![1, 2, 0], 1.0)],
        };
        let m = merge_cycles(&net, &d, None);
        assert_eq!(m.reconstruction.len(), 1);
        assert_eq!(m.reconstruction.routes()[0].edges(), &[0, 1, 2, 0, 1]);
        assert_eq!(m.reconstruction.coefficients(), &[1.0]);
        assert_eq!(reconstructed_flow(&m.reconstruction, 3), d.edge_flow(3).values);
    }

    #[test]
    fn heavy_cycle_is_traversed_repeatedly() {
        let net = triangle();
        let d = PathCycleDecomposition {
            paths: vec![(vec![0, 1], 1.0)],
            cycles: vec![(vec![0, 1, 2], 2.5)],
        };
        let m = merge_cycles(&net, &d, None);
        assert_eq!(m.reconstruction.routes()[0].len(), 2 + 3 * 3);
        assert_eq!(m.stats.rounding_excess, 0.5 * 3.0);
    }

    #[test]
    fn disjoint_cycle_is_dropped() {
        let net = crate::network::fixtures::build(
            &[("a", 0.0, 0.0), ("b", 1.0, 0.0), ("c", 5.0, 0.0), ("d", 6.0, 0.0)],
            &[("ab", "a", "b"), ("cd", "c", "d"), ("dc", "d", "c")],
        );
        let d = PathCycleDecomposition {
            paths: vec![(vec![0], 1.0)],
            cycles: vec![(vec![1, 2], 2.0)],
        };
        let m = merge_cycles(&net, &d, None);
        assert_eq!(m.reconstruction.len(), 1);
        assert_eq!(m.stats.dropped_cycles, 1);
        assert_eq!(m.stats.dropped_mass, 4.0);
    }
}
