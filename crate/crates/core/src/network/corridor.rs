use super::RoadNetwork;
use crate::geometry::Trajectory;

#[derive(Debug, Clone, Copy)]
pub struct CorridorOptions {
    /// Evenly spaced interior points of an edge that must lie within the
    /// corridor radius, in addition to both endpoints.
    pub interior_samples: usize,
}

impl Default for CorridorOptions {
    fn default() -> Self {
        CorridorOptions {
            interior_samples: 1,
        }
    }
}

/// Vertices and edges of a network near one trajectory.
///
/// All index lists are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorSubgraph {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub sources: Vec<usize>,
    pub sinks: Vec<usize>,
    vertex_member: Vec<bool>,
    edge_member: Vec<bool>,
}

impl CorridorSubgraph {
    pub fn contains_vertex(&self, v: usize) -> bool {
        self.vertex_member[v]
    }

    pub fn contains_edge(&self, e: usize) -> bool {
        self.edge_member[e]
    }

    /// Builds a corridor directly from index sets (used for whole-network
    /// commodities).
    pub fn from_parts(
        net: &RoadNetwork,
        edges: Vec<usize>,
        sources: Vec<usize>,
        sinks: Vec<usize>,
    ) -> Self {
        let mut vertex_member = vec![false; net.vertex_count()];
        let mut edge_member = vec![false; net.edge_count()];
        for &e in &edges {
            edge_member[e] = true;
            vertex_member[net.edge(e).from] = true;
            vertex_member[net.edge(e).to] = true;
        }
        for &v in sources.iter().chain(&sinks) {
            vertex_member[v] = true;
        }
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        let mut sources = sources;
        sources.sort_unstable();
        sources.dedup();
        let mut sinks = sinks;
        sinks.sort_unstable();
        sinks.dedup();
        CorridorSubgraph {
            vertices: (0..net.vertex_count()).filter(|&v| vertex_member[v]).collect(),
            edges,
            sources,
            sinks,
            vertex_member,
            edge_member,
        }
    }
}

/// Corridor with the default single midpoint sample. `None` means the
/// trajectory has no network vertex within `eps` ("no coverage").
pub fn corridor(net: &RoadNetwork, traj: &Trajectory, eps: f64) -> Option<CorridorSubgraph> {
    corridor_with(net, traj, eps, CorridorOptions::default())
}

pub fn corridor_with(
    net: &RoadNetwork,
    traj: &Trajectory,
    eps: f64,
    opts: CorridorOptions,
) -> Option<CorridorSubgraph> {
    assert!(eps > 0.0, "corridor radius must be positive");
    let pts = traj.points();
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let near = |p: crate::geometry::Point| {
        p.x >= min_x - eps
            && p.x <= max_x + eps
            && p.y >= min_y - eps
            && p.y <= max_y + eps
            && traj.distance_to(p) <= eps
    };

    let mut vertex_member = vec![false; net.vertex_count()];
    let mut vertices = Vec::new();
    for (v, vert) in net.vertices().iter().enumerate() {
        if near(vert.pos) {
            vertex_member[v] = true;
            vertices.push(v);
        }
    }
    if vertices.is_empty() {
        return None;
    }

    let mut edge_member = vec![false; net.edge_count()];
    let mut edges = Vec::new();
    let samples = opts.interior_samples;
    for (e, edge) in net.edges().iter().enumerate() {
        if !(vertex_member[edge.from] && vertex_member[edge.to]) {
            continue;
        }
        let (a, b) = net.segment(e);
        let inside = (1..=samples).all(|i| near(a.lerp(b, i as f64 / (samples + 1) as f64)));
        if inside {
            edge_member[e] = true;
            edges.push(e);
        }
    }

    let (start, end) = (traj.start(), traj.end());
    let sources = vertices
        .iter()
        .copied()
        .filter(|&v| net.pos(v).dist(start) <= eps)
        .collect();
    let sinks = vertices
        .iter()
        .copied()
        .filter(|&v| net.pos(v).dist(end) <= eps)
        .collect();
    Some(CorridorSubgraph {
        vertices,
        edges,
        sources,
        sinks,
        vertex_member,
        edge_member,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::network::fixtures::f2;

    fn t1() -> Trajectory {
        Trajectory::new("t1", vec![Point::new(0.0, 0.0), Point::new(200.0, 0.0)]).unwrap()
    }

    #[test]
    fn narrow_corridor_excludes_detour() {
        let net = f2();
        let c = corridor(&net, &t1(), 50.0).unwrap();
        assert_eq!(c.vertices, vec![0, 1, 2]);
        assert_eq!(c.edges, vec![0, 1]);
        assert_eq!(c.sources, vec![0]);
        assert_eq!(c.sinks, vec![2]);
    }

    #[test]
    fn wide_corridor_includes_everything() {
        let net = f2();
        let c = corridor(&net, &t1(), 100.0).unwrap();
        assert_eq!(c.vertices, vec![0, 1, 2, 3]);
        assert_eq!(c.edges, vec![0, 1, 2, 3]);
        // v1 is exactly 100 from both trajectory ends.
        assert_eq!(c.sources, vec![0, 1]);
        assert_eq!(c.sinks, vec![1, 2]);
    }

    #[test]
    fn off_network_trajectory_has_no_coverage() {
        let net = f2();
        let t = Trajectory::new("far", vec![Point::new(0.0, 1000.0), Point::new(50.0, 1000.0)]).unwrap();
        assert!(corridor(&net, &t, 10.0).is_none());
    }
}
