//! Quadratic-deviation min-cost flow baselines and their conversion into
//! route reconstructions.
//!
//! Flows are sums of nonnegative source-to-sink path and cycle flows, so the
//! solvers work on that cone directly: a restricted master problem fits path
//! and cycle coefficients by NNLS and Bellman–Ford pricing on the negated
//! residual finds the next improving column. When pricing finds nothing the
//! residual has `sum r(e) <= tol * scale / 2` along every admissible path
//! and cycle, which is the stationarity certificate.

mod decompose;
mod merge;
mod pipeline;
mod solver;

use serde::Serialize;

use crate::network::{CorridorSubgraph, RoadNetwork};

pub use decompose::decompose;
pub use merge::{merge_cycles, MergeOutput};
pub use pipeline::{mincost_reconstruction, MinCostMode, MinCostOutput};
pub use solver::{solve_gmcf, solve_mcmcf, SolverOptions, SolverReport};

/// Vertices allowed to emit (sources) and absorb (sinks) flow, by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TerminalSpec {
    pub sources: Vec<usize>,
    pub sinks: Vec<usize>,
}

impl TerminalSpec {
    pub fn new(mut sources: Vec<usize>, mut sinks: Vec<usize>) -> Self {
        sources.sort_unstable();
        sources.dedup();
        sinks.sort_unstable();
        sinks.dedup();
        Self { sources, sinks }
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty() || self.sinks.is_empty()
    }

    pub fn is_terminal(&self, v: usize) -> bool {
        self.sources.binary_search(&v).is_ok() || self.sinks.binary_search(&v).is_ok()
    }

    pub fn union<'a>(specs: impl IntoIterator<Item = &'a TerminalSpec>) -> Self {
        let (mut s, mut t) = (Vec::new(), Vec::new());
        for spec in specs {
            s.extend_from_slice(&spec.sources);
            t.extend_from_slice(&spec.sinks);
        }
        Self::new(s, t)
    }
}

/// Nonnegative per-edge flow values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeFlow {
    pub values: Vec<f64>,
}

impl EdgeFlow {
    pub fn zeros(edge_count: usize) -> Self {
        Self { values: vec![0.0; edge_count] }
    }

    /// Out-flow minus in-flow per vertex.
    pub fn balance(&self, net: &RoadNetwork) -> Vec<f64> {
        let mut b = vec![0.0; net.vertex_count()];
        for (e, &f) in self.values.iter().enumerate() {
            let edge = net.edge(e);
            b[edge.from] += f;
            b[edge.to] -= f;
        }
        b
    }

    /// Largest conservation violation: imbalance at non-terminals, inflow
    /// surplus at pure sources and outflow surplus at pure sinks.
    pub fn conservation_violation(&self, net: &RoadNetwork, terminals: &TerminalSpec) -> f64 {
        let src = |v: usize| terminals.sources.binary_search(&v).is_ok();
        let snk = |v: usize| terminals.sinks.binary_search(&v).is_ok();
        self.balance(net)
            .iter()
            .enumerate()
            .map(|(v, &b)| match (src(v), snk(v)) {
                (true, true) => 0.0,
                (true, false) => (-b).max(0.0),
                (false, true) => b.max(0.0),
                (false, false) => b.abs(),
            })
            .fold(0.0, f64::max)
    }

    pub fn deviation_from(&self, phi: &[f64]) -> f64 {
        self.values.iter().zip(phi).map(|(f, p)| (p - f) * (p - f)).sum()
    }
}

/// One trajectory's commodity: its corridor and terminals.
#[derive(Debug, Clone)]
pub struct Commodity {
    pub trajectory: String,
    pub corridor: CorridorSubgraph,
}

impl Commodity {
    pub fn terminals(&self) -> TerminalSpec {
        TerminalSpec::new(self.corridor.sources.clone(), self.corridor.sinks.clone())
    }
}

#[derive(Debug, Clone)]
pub struct CommodityFlow {
    pub trajectory: String,
    pub corridor: CorridorSubgraph,
    pub flow: EdgeFlow,
}

/// Weighted source-to-sink paths and cycles, as edge index sequences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathCycleDecomposition {
    pub paths: Vec<(Vec<usize>, f64)>,
    pub cycles: Vec<(Vec<usize>, f64)>,
}

impl PathCycleDecomposition {
    pub fn piece_count(&self) -> usize {
        self.paths.len() + self.cycles.len()
    }

    pub fn edge_flow(&self, edge_count: usize) -> EdgeFlow {
        let mut f = EdgeFlow::zeros(edge_count);
        for (edges, v) in self.paths.iter().chain(&self.cycles) {
            for &e in edges {
                f.values[e] += v;
            }
        }
        f
    }
}
