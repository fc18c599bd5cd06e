//! Synthetic scenarios: grid networks, perturbed shortest-path ground truth
//! and trajectory sampling.

use std::path::Path;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{write_trajectories, Trajectory};
use crate::network::{write_flow_field, write_network, EdgeSpec, FlowField, RoadNetwork, Vertex};
use crate::reconstruct::{write_reconstruction, Reconstruction, Route};

/// `rows x cols` grid with `spacing` meters between neighbours and edges in
/// both directions. Vertex ids are `v{row:03}_{col:03}`.
pub fn grid_network(rows: usize, cols: usize, spacing: f64) -> RoadNetwork {
    let id = |r: usize, c: usize| format!("v{r:03}_{c:03}");
    let mut vertices = Vec::with_capacity(rows * cols);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            vertices.push(Vertex::new(id(r, c), c as f64 * spacing, r as f64 * spacing));
            let mut link = |a: String, b: String| edges.push(EdgeSpec::new(format!("{a}-{b}"), a, b));
            if c + 1 < cols {
                link(id(r, c), id(r, c + 1));
                link(id(r, c + 1), id(r, c));
            }
            if r + 1 < rows {
                link(id(r, c), id(r + 1, c));
                link(id(r + 1, c), id(r, c));
            }
        }
    }
    RoadNetwork::new(vertices, edges).expect("grid is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_routes: usize,
    /// Upper bound of the per-edge additive length perturbation, meters.
    pub gamma: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_routes: 5000,
            gamma: 500.0,
            alpha: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_routes == 0 {
            return Err(Error::invalid("route count must be at least 1"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Vertices of the largest strongly connected component, sorted; ties go to
/// the component holding the smallest vertex index.
pub fn largest_scc(net: &RoadNetwork) -> Vec<usize> {
    let mut g = DiGraph::<(), ()>::with_capacity(net.vertex_count(), net.edge_count());
    let nodes: Vec<_> = (0..net.vertex_count()).map(|_| g.add_node(())).collect();
    for e in net.edges() {
        g.add_edge(nodes[e.from], nodes[e.to], ());
    }
    let mut best: Vec<usize> = Vec::new();
    for comp in tarjan_scc(&g) {
        let mut c: Vec<usize> = comp.into_iter().map(|n| n.index()).collect();
        c.sort_unstable();
        if c.len() > best.len() || (c.len() == best.len() && c.first() < best.first()) {
            best = c;
        }
    }
    best
}

/// One shortest path per route between random distinct vertices of the
/// largest strongly connected component, with every edge length perturbed
/// by an independent uniform draw from `[0, gamma]`. Route `i` uses the
/// random stream seeded with `seed + i`.
pub fn perturbed_shortest_paths(net: &RoadNetwork, cfg: &ScenarioConfig) -> Result<Vec<Route>> {
    cfg.validate()?;
    let comp = largest_scc(net);
    if comp.len() < 2 {
        return Err(Error::invalid("network has no strongly connected pair of vertices"));
    }
    let base: Vec<f64> = (0..net.edge_count()).map(|e| net.edge_length(e)).collect();
    (0..cfg.n_routes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
            let s = comp[rng.gen_range(0..comp.len())];
            let mut t = comp[rng.gen_range(0..comp.len() - 1)];
            if t >= s {
                // Skip s within the sorted component.
                t = comp[comp.binary_search(&t).unwrap() + 1];
            }
            let lengths: Vec<f64> = base.iter().map(|&l| l + rng.gen::<f64>() * cfg.gamma).collect();
            let edges = net
                .shortest_path(s, t, |e| lengths[e])
                .ok_or_else(|| Error::invalid("no path inside a strongly connected component"))?;
            Route::new(net, edges)
        })
        .collect()
}

/// Edge traversal counts of the routes.
pub fn flow_from_routes(routes: &[Route], net: &RoadNetwork) -> FlowField {
    let mut counts = vec![0u64; net.edge_count()];
    for r in routes {
        for &e in r.edges() {
            counts[e] += 1;
        }
    }
    FlowField::from_counts(counts)
}

/// Vertex positions along the route, without timestamps.
pub fn route_to_trajectory(route: &Route, net: &RoadNetwork, id: impl Into<String>) -> Trajectory {
    Trajectory::new(id, route.polyline(net)).expect("route vertices are distinct consecutively")
}

/// Size of a sample at rate `alpha`: `ceil(alpha * n)`, guarding against
/// products that land a hair above an integer.
pub fn sample_size(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Uniform sample without replacement of `ceil(alpha * n)` trajectories,
/// kept in input order.
pub fn sample_trajectories(all: &[Trajectory], alpha: f64, seed: u64) -> Vec<Trajectory> {
    let k = sample_size(all.len(), alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, all.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| all[i].clone()).collect()
}

pub struct Scenario {
    pub ground_truth: Vec<Route>,
    pub flow: FlowField,
    /// One trajectory per ground-truth route, ids `t{index}`.
    pub all_trajectories: Vec<Trajectory>,
    pub trajectories: Vec<Trajectory>,
}

pub fn trajectory_id(i: usize) -> String {
    format!("t{i:05}")
}

pub fn generate_scenario(net: &RoadNetwork, cfg: &ScenarioConfig) -> Result<Scenario> {
    let ground_truth = perturbed_shortest_paths(net, cfg)?;
    let flow = flow_from_routes(&ground_truth, net);
    let all: Vec<Trajectory> = ground_truth
        .iter()
        .enumerate()
        .map(|(i, r)| route_to_trajectory(r, net, trajectory_id(i)))
        .collect();
    let trajectories = sample_trajectories(&all, cfg.alpha, cfg.seed);
    Ok(Scenario {
        ground_truth,
        flow,
        all_trajectories: all,
        trajectories,
    })
}

/// Ground truth as a reconstruction with unit coefficients and the
/// matching trajectory as provenance.
pub fn ground_truth_reconstruction(routes: &[Route]) -> Reconstruction {
    let mut rec = Reconstruction::new();
    for (i, r) in routes.iter().enumerate() {
        rec.push(r.clone(), 1.0, Some(trajectory_id(i)));
    }
    rec
}

pub const NETWORK_FILE: &str = "network.json";
pub const FLOW_FILE: &str = "flow.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";

/// Writes network, flow, ground truth and sampled trajectories into `dir`.
pub fn write_bundle(dir: impl AsRef<Path>, net: &RoadNetwork, s: &Scenario) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_network(dir.join(NETWORK_FILE), net)?;
    write_flow_field(dir.join(FLOW_FILE), net, &s.flow)?;
    write_reconstruction(dir.join(GROUND_TRUTH_FILE), net, &ground_truth_reconstruction(&s.ground_truth), 0.0)?;
    write_trajectories(dir.join(TRAJECTORIES_FILE), &s.trajectories)
}
