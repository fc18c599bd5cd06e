use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{Commodity, CommodityFlow, EdgeFlow, TerminalSpec};
use crate::error::{Error, Result};
use crate::network::{FlowField, RoadNetwork};
use crate::reconstruct::{column, Nnls, DEFAULT_TOL};

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stationarity tolerance relative to `max(1, sum phi^2)`.
    pub tol: f64,
    pub max_rounds: usize,
    /// Path columns priced per domain and round.
    pub paths_per_round: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_rounds: 100_000,
            paths_per_round: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub objective: f64,
    /// Bound on the projected gradient certified at termination.
    pub stationarity: f64,
    pub rounds: usize,
    pub columns: usize,
    pub active_columns: usize,
}

/// Admissible edges and terminals of one flow, in local vertex indices.
struct Domain {
    edges: Vec<(usize, usize, usize)>,
    n: usize,
    sources: Vec<usize>,
    sinks: Vec<usize>,
}

impl Domain {
    fn new(net: &RoadNetwork, vertices: &[usize], edges: &[usize], terminals: &TerminalSpec) -> Self {
        let local = |v: usize| vertices.binary_search(&v).ok();
        let edges = edges
            .iter()
            .filter_map(|&e| {
                let ed = net.edge(e);
                Some((local(ed.from)?, local(ed.to)?, e))
            })
            .collect();
        Self {
            edges,
            n: vertices.len(),
            sources: terminals.sources.iter().filter_map(|&v| local(v)).collect(),
            sinks: terminals.sinks.iter().filter_map(|&v| local(v)).collect(),
        }
    }

    /// Bellman–Ford from `starts` with cost `eta - r(e)`. Returns the vertex
    /// left on a negative cycle, if any.
    fn bellman_ford(&self, starts: &[usize], r: &[f64], eta: f64, dist: &mut [f64], pred: &mut [usize]) -> Option<usize> {
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        for &s in starts {
            dist[s] = 0.0;
        }
        for round in 0..=self.n {
            let mut updated = None;
            for (k, &(a, b, e)) in self.edges.iter().enumerate() {
                let d = dist[a] + (eta - r[e]);
                if d < dist[b] {
                    dist[b] = d;
                    pred[b] = k;
                    updated = Some(b);
                }
            }
            match updated {
                None => return None,
                Some(b) if round == self.n => return Some(b),
                _ => {}
            }
        }
        None
    }

    /// Improving columns as global edge sequences: one cycle if any exists,
    /// otherwise the best source-to-sink paths.
    fn price(&self, r: &[f64], eta: f64, max_paths: usize) -> Vec<Vec<usize>> {
        if self.edges.is_empty() {
            return Vec::new();
        }
        let mut dist = vec![0.0; self.n];
        let mut pred = vec![usize::MAX; self.n];
        let all: Vec<usize> = (0..self.n).collect();
        if let Some(mut x) = self.bellman_ford(&all, r, eta, &mut dist, &mut pred) {
            for _ in 0..self.n {
                x = self.edges[pred[x]].0;
            }
            let mut cycle = Vec::new();
            let mut y = x;
            loop {
                let (a, _, e) = self.edges[pred[y]];
                cycle.push(e);
                y = a;
                if y == x || cycle.len() > self.n {
                    break;
                }
            }
            cycle.reverse();
            let cost: f64 = cycle.iter().map(|&e| eta - r[e]).sum();
            if y == x && cost < 0.0 {
                return vec![cycle];
            }
            log::debug!("discarded a numerically degenerate cycle");
            return Vec::new();
        }
        if self.sources.is_empty() || self.sinks.is_empty() {
            return Vec::new();
        }
        self.bellman_ford(&self.sources, r, eta, &mut dist, &mut pred);
        let mut ends: Vec<usize> = self.sinks.iter().copied().filter(|&t| dist[t] < 0.0).collect();
        ends.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        ends.truncate(max_paths);
        ends.into_iter()
            .filter_map(|t| {
                let mut path = Vec::new();
                let mut y = t;
                while pred[y] != usize::MAX && path.len() <= self.n {
                    let (a, _, e) = self.edges[pred[y]];
                    path.push(e);
                    y = a;
                }
                path.reverse();
                (!path.is_empty() && path.len() <= self.n).then_some(path)
            })
            .collect()
    }
}

/// Canonical key: cycles rotated to start at their smallest edge index.
fn column_key(edges: &[usize], net: &RoadNetwork) -> Vec<usize> {
    let closed = net.edge(edges[0]).from == net.edge(*edges.last().unwrap()).to;
    if !closed {
        return edges.to_vec();
    }
    let k = (0..edges.len()).min_by_key(|&i| edges[i]).unwrap();
    edges[k..].iter().chain(&edges[..k]).copied().collect()
}

struct Solved {
    /// `(domain, edges, value)` per column.
    columns: Vec<(usize, Vec<usize>, f64)>,
    report: SolverReport,
}

fn column_generation(net: &RoadNetwork, phi: &FlowField, domains: &[Domain], opts: SolverOptions) -> Result<Solved> {
    let b = phi.to_f64();
    let scale = phi.sum_squares().max(1.0);
    let threshold = opts.tol * scale / 2.0;
    let n_max = domains.iter().map(|d| d.n).max().unwrap_or(0);
    // Master optimality is held below the pricing detection limit so known
    // columns are never priced again.
    let eta_floor = threshold / (n_max + 1) as f64;
    let mut nnls = Nnls::new(b, opts.tol / (n_max + 1) as f64);
    let mut meta: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut known: HashSet<Vec<usize>> = HashSet::new();
    let mut rounds = 0;
    loop {
        nnls.solve(100 * (nnls.len() + 10))?;
        let r = nnls.residual();
        let priced: Vec<(usize, Vec<usize>)> = domains
            .par_iter()
            .enumerate()
            .flat_map_iter(|(d, dom)| {
                let eta = (threshold / (dom.n + 1) as f64).max(eta_floor);
                dom.price(&r, eta, opts.paths_per_round).into_iter().map(move |c| (d, c))
            })
            .collect();
        let mut added = 0;
        for (d, edges) in priced {
            if known.insert(column_key(&edges, net)) {
                nnls.push_column(column(&edges));
                meta.push((d, edges));
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
        rounds += 1;
        if rounds >= opts.max_rounds {
            let x = nnls.solution().to_vec();
            return Err(Error::NonConvergence {
                solver: "column generation",
                iterations: rounds,
                residual: f64::NAN,
                best: x,
            });
        }
    }
    let x = nnls.solution();
    let residual = nnls.residual();
    let report = SolverReport {
        objective: residual.iter().map(|v| v * v).sum(),
        stationarity: 2.0 * threshold,
        rounds,
        columns: meta.len(),
        active_columns: x.iter().filter(|&&v| v > 0.0).count(),
    };
    log::info!(
        "flow solver: {} rounds, {} columns ({} active), objective {:.6e}",
        report.rounds,
        report.columns,
        report.active_columns,
        report.objective
    );
    let columns = meta.into_iter().zip(x).map(|((d, e), &v)| (d, e, v)).collect();
    Ok(Solved { columns, report })
}

fn accumulate(columns: &[(usize, Vec<usize>, f64)], domain: usize, edge_count: usize) -> EdgeFlow {
    let mut f = EdgeFlow::zeros(edge_count);
    for (_, edges, v) in columns.iter().filter(|c| c.0 == domain && c.2 > 0.0) {
        for &e in edges {
            f.values[e] += v;
        }
    }
    f
}

/// Min-deviation flow over the whole network with the given terminals.
pub fn solve_gmcf(
    net: &RoadNetwork,
    phi: &FlowField,
    terminals: &TerminalSpec,
    opts: SolverOptions,
) -> Result<(EdgeFlow, SolverReport)> {
    if terminals.is_empty() {
        return Err(Error::NoTerminals("the flow needs at least one source and one sink".into()));
    }
    let vertices: Vec<usize> = (0..net.vertex_count()).collect();
    let edges: Vec<usize> = (0..net.edge_count()).collect();
    let domain = Domain::new(net, &vertices, &edges, terminals);
    let solved = column_generation(net, phi, std::slice::from_ref(&domain), opts)?;
    Ok((accumulate(&solved.columns, 0, net.edge_count()), solved.report))
}

/// Min-deviation sum of per-commodity flows, each confined to its corridor.
pub fn solve_mcmcf(
    net: &RoadNetwork,
    phi: &FlowField,
    commodities: &[Commodity],
    opts: SolverOptions,
) -> Result<(Vec<CommodityFlow>, SolverReport)> {
    if commodities.is_empty() {
        return Err(Error::NoTerminals("no commodities".into()));
    }
    let domains: Vec<Domain> = commodities
        .iter()
        .map(|c| {
            let t = c.terminals();
            if c.corridor.edges.is_empty() || t.is_empty() {
                log::warn!("commodity {} has an empty corridor or no terminals", c.trajectory);
            }
            Domain::new(net, &c.corridor.vertices, &c.corridor.edges, &t)
        })
        .collect();
    let solved = column_generation(net, phi, &domains, opts)?;
    let flows = commodities
        .iter()
        .enumerate()
        .map(|(d, c)| CommodityFlow {
            trajectory: c.trajectory.clone(),
            corridor: c.corridor.clone(),
            flow: accumulate(&solved.columns, d, net.edge_count()),
        })
        .collect();
    Ok((flows, solved.report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::{build, f2};
    use crate::network::CorridorSubgraph;

    #[test]
    fn conserving_phi_is_reproduced() {
        let net = f2();
        let phi = FlowField::from_counts(vec![2, 2, 1, 1]);
        let (f, rep) = solve_gmcf(&net, &phi, &TerminalSpec::new(vec![0], vec![2]), Default::default()).unwrap();
        for (a, b) in f.values.iter().zip([2.0, 2.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(rep.objective < 1e-12);
    }

    #[test]
    fn imbalance_is_split() {
        let net = build(
            &[("a", 0.0, 0.0), ("b", 1.0, 0.0), ("c", 2.0, 0.0)],
            &[("ab", "a", "b"), ("bc", "b", "c")],
        );
        let phi = FlowField::from_counts(vec![3, 1]);
        let (f, rep) = solve_gmcf(&net, &phi, &TerminalSpec::new(vec![0], vec![2]), Default::default()).unwrap();
        assert!((f.values[0] - 2.0).abs() < 1e-9 && (f.values[1] - 2.0).abs() < 1e-9);
        assert!((rep.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_phi_gives_zero_flow() {
        let net = f2();
        let (f, rep) = solve_gmcf(&net, &FlowField::zeros(&net), &TerminalSpec::new(vec![0], vec![2]), Default::default()).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert_eq!(rep.objective, 0.0);
    }

    #[test]
    fn positive_cycle_is_used() {
        let net = build(
            &[("u", 0.0, 0.0), ("v", 1.0, 0.0), ("w", 0.0, 1.0)],
            &[("uv", "u", "v"), ("vw", "v", "w"), ("wu", "w", "u")],
        );
        let phi = FlowField::from_counts(vec![2, 2, 1]);
        let (f, rep) = solve_gmcf(&net, &phi, &TerminalSpec::new(vec![0], vec![2]), Default::default()).unwrap();
        assert!(rep.objective < 1e-12, "{f:?}");
    }

    #[test]
    fn no_terminals_is_an_error() {
        let net = f2();
        let err = solve_gmcf(&net, &FlowField::zeros(&net), &TerminalSpec::default(), Default::default());
        assert!(matches!(err, Err(Error::NoTerminals(_))));
        assert!(matches!(solve_mcmcf(&net, &FlowField::zeros(&net), &[], Default::default()), Err(Error::NoTerminals(_))));
    }

    #[test]
    fn mcmcf_exact_cover() {
        let net = f2();
        let phi = FlowField::from_counts(vec![2, 2, 1, 1]);
        let c1 = CorridorSubgraph::from_parts(&net, vec![0, 1], vec![0], vec![2]);
        let c2 = CorridorSubgraph::from_parts(&net, vec![2, 3], vec![0], vec![2]);
        let empty = CorridorSubgraph::from_parts(&net, vec![], vec![], vec![]);
        let coms = vec![
            Commodity { trajectory: "t1".into(), corridor: c1 },
            Commodity { trajectory: "t2".into(), corridor: c2 },
            Commodity { trajectory: "t3".into(), corridor: empty },
        ];
        let (flows, rep) = solve_mcmcf(&net, &phi, &coms, Default::default()).unwrap();
        assert!(rep.objective < 1e-12);
        let f1 = &flows[0].flow.values;
        let f2 = &flows[1].flow.values;
        assert!((f1[0] - 2.0).abs() < 1e-9 && (f1[1] - 2.0).abs() < 1e-9 && f1[2] == 0.0);
        assert!((f2[2] - 1.0).abs() < 1e-9 && (f2[3] - 1.0).abs() < 1e-9 && f2[0] == 0.0);
        assert!(flows[2].flow.values.iter().all(|&v| v == 0.0));
    }
}
