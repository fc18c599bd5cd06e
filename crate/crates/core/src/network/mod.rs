//! Road network, flow fields and trajectory corridors.
//!
//! Vertices and edges are stored sorted by id, so index order is id order and
//! every iteration over them is deterministic.

mod corridor;
pub(crate) mod io;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::geometry::Point;

pub use corridor::{corridor, corridor_with, CorridorOptions, CorridorSubgraph};
pub use io::{
    load_flow_field, load_network, write_edge_values, write_flow_field, write_network,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub pos: Point,
}

impl Vertex {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            id: id.into(),
            pos: Point::new(x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
}

/// Edge description by vertex ids, used when assembling a network.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
}

impl EdgeSpec {
    pub fn new(id: impl Into<String>, from: impl Into<String>, to: impl Into<String>) -> Self {
        EdgeSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
        }
    }
}

/// Directed road network with straight-segment edges in planar meters.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    vertex_lookup: HashMap<String, usize>,
    edge_lookup: HashMap<String, usize>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl RoadNetwork {
    pub fn new(mut vertices: Vec<Vertex>, mut edges: Vec<EdgeSpec>) -> Result<Self> {
        vertices.sort_by(|a, b| a.id.cmp(&b.id));
        edges.sort_by(|a, b| a.id.cmp(&b.id));
        let mut vertex_lookup = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if !v.pos.is_finite() {
                return Err(Error::invalid(format!("vertex {}: non-finite position", v.id)));
            }
            if vertex_lookup.insert(v.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut edge_lookup = HashMap::with_capacity(edges.len());
        let mut out_edges = vec![Vec::new(); vertices.len()];
        let mut in_edges = vec![Vec::new(); vertices.len()];
        let mut built = Vec::with_capacity(edges.len());
        for (i, e) in edges.into_iter().enumerate() {
            let lookup = |vid: &str| {
                vertex_lookup.get(vid).copied().ok_or_else(|| {
                    Error::invalid(format!("edge {} references unknown vertex {}", e.id, vid))
                })
            };
            let from = lookup(&e.from)?;
            let to = lookup(&e.to)?;
            if from == to {
                return Err(Error::invalid(format!("edge {} is a self-loop", e.id)));
            }
            if edge_lookup.insert(e.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate edge id {}", e.id)));
            }
            out_edges[from].push(i);
            in_edges[to].push(i);
            built.push(Edge { id: e.id, from, to });
        }
        Ok(RoadNetwork {
            vertices,
            edges: built,
            vertex_lookup,
            edge_lookup,
            out_edges,
            in_edges,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertex_lookup.get(id).copied()
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edge_lookup.get(id).copied()
    }

    pub fn pos(&self, v: usize) -> Point {
        self.vertices[v].pos
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    /// Tail and head positions of edge `e`.
    pub fn segment(&self, e: usize) -> (Point, Point) {
        let edge = &self.edges[e];
        (self.pos(edge.from), self.pos(edge.to))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.segment(e);
        a.dist(b)
    }

    /// Shortest `s → t` path under per-edge `weight`, as an edge sequence.
    /// Ties break towards lower vertex indices. Returns `None` when `t` is
    /// unreachable; `Some(vec![])` when `s == t`.
    pub fn shortest_path(
        &self,
        s: usize,
        t: usize,
        weight: impl Fn(usize) -> f64,
    ) -> Option<Vec<usize>> {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        heap.push(Reverse((OrdF64(0.0), s)));
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == t {
                break;
            }
            for &e in &self.out_edges[u] {
                let v = self.edges[e].to;
                let nd = d + weight(e);
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = Some(e);
                    heap.push(Reverse((OrdF64(nd), v)));
                }
            }
        }
        if !done[t] {
            return None;
        }
        let mut path = Vec::new();
        let mut v = t;
        while let Some(e) = pred[v] {
            path.push(e);
            v = self.edges[e].from;
        }
        path.reverse();
        Some(path)
    }
}

/// Total order wrapper for finite floats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Measured vehicle count per edge. Edges never mentioned count as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowField {
    counts: Vec<u64>,
}

impl FlowField {
    pub fn zeros(net: &RoadNetwork) -> Self {
        FlowField {
            counts: vec![0; net.edge_count()],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        FlowField { counts }
    }

    pub fn get(&self, e: usize) -> u64 {
        self.counts[e]
    }

    pub fn set(&mut self, e: usize, v: u64) {
        self.counts[e] = v;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// `Σ_e φ(e)²`, the deviation of an empty reconstruction.
    pub fn sum_squares(&self) -> f64 {
        self.counts.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }
}

/// Real-valued per-edge field, e.g. input flow minus reconstructed flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    values: Vec<f64>,
}

impl ResidualField {
    pub fn new(values: Vec<f64>) -> Self {
        ResidualField { values }
    }

    pub fn from_flow(phi: &FlowField) -> Self {
        ResidualField {
            values: phi.to_f64(),
        }
    }

    pub fn get(&self, e: usize) -> f64 {
        self.values[e]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn build(vs: &[(&str, f64, f64)], es: &[(&str, &str, &str)]) -> RoadNetwork {
        RoadNetwork::new(
            vs.iter()
                .map(|&(id, x, y)| Vertex {
                    id: id.into(),
                    pos: Point::new(x, y),
                })
                .collect(),
            es.iter().map(|&(id, f, t)| EdgeSpec::new(id, f, t)).collect(),
        )
        .unwrap()
    }

    /// v0(0,0) → v1(100,0) → v2(200,0).
    pub fn f1() -> RoadNetwork {
        build(
            &[("v0", 0.0, 0.0), ("v1", 100.0, 0.0), ("v2", 200.0, 0.0)],
            &[("e0", "v0", "v1"), ("e1", "v1", "v2")],
        )
    }

    /// Two routes from v0 to v2: straight (a, b) and via v3 (c, d).
    pub fn f2() -> RoadNetwork {
        build(
            &[
                ("v0", 0.0, 0.0),
                ("v1", 100.0, 0.0),
                ("v2", 200.0, 0.0),
                ("v3", 100.0, 80.0),
            ],
            &[("a", "v0", "v1"), ("b", "v1", "v2"), ("c", "v0", "v3"), ("d", "v3", "v2")],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn indices_follow_id_order() {
        let net = f2();
        let ids: Vec<_> = net.edges().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c", "d"]);
        assert_eq!(net.vertex_index("v3"), Some(3));
        assert_eq!(net.out_edges(0), &[0, 2]);
        assert_eq!(net.in_edges(2), &[1, 3]);
    }

    #[test]
    fn rejects_unknown_vertex_and_self_loop() {
        let v = vec![Vertex {
            id: "a".into(),
            pos: Point::new(0.0, 0.0),
        }];
        let err = RoadNetwork::new(v.clone(), vec![EdgeSpec::new("e", "a", "zz")]).unwrap_err();
        assert!(err.to_string().contains("zz"));
        assert!(RoadNetwork::new(v, vec![EdgeSpec::new("e", "a", "a")]).is_err());
    }

    #[test]
    fn parallel_edges_need_distinct_ids() {
        let v = vec![
            Vertex {
                id: "a".into(),
                pos: Point::new(0.0, 0.0),
            },
            Vertex {
                id: "b".into(),
                pos: Point::new(1.0, 0.0),
            },
        ];
        let ok = RoadNetwork::new(
            v.clone(),
            vec![EdgeSpec::new("e1", "a", "b"), EdgeSpec::new("e2", "a", "b"), EdgeSpec::new("e3", "b", "a")],
        );
        assert!(ok.is_ok());
        let dup = RoadNetwork::new(v, vec![EdgeSpec::new("e1", "a", "b"), EdgeSpec::new("e1", "b", "a")]);
        assert!(dup.is_err());
    }

    #[test]
    fn shortest_path_prefers_straight_route() {
        let net = f2();
        let p = net.shortest_path(0, 2, |e| net.edge_length(e)).unwrap();
        assert_eq!(p, vec![0, 1]);
        assert_eq!(net.shortest_path(2, 0, |e| net.edge_length(e)), None);
        assert_eq!(net.shortest_path(1, 1, |_| 1.0), Some(vec![]));
    }
}
