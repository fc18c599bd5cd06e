//! Reconstructions as weighted route sets, their flow arithmetic, the
//! nonnegative coefficient solver and the iterative route generation driver.

mod driver;
mod io;
mod nnls;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::network::{FlowField, ResidualField, RoadNetwork};

pub use driver::{frechet_routes, generate_basis_routes, FRConfig, FrechetRoutesOutput, IterationStats, Variant};
pub use io::{load_reconstruction, write_reconstruction};
pub use nnls::{kkt_residual, solve_coefficients, solve_coefficients_warm, CoefficientSolution};
pub(crate) use nnls::{column, Nnls};

/// Default threshold below which coefficients count as zero.
pub const DEFAULT_TOL: f64 = 1e-7;

/// A connected edge sequence; edges may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Route {
    edges: Vec<usize>,
}

impl Route {
    pub fn new(net: &RoadNetwork, edges: Vec<usize>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::invalid("route has no edges"));
        }
        if let Some(&e) = edges.iter().find(|&&e| e >= net.edge_count()) {
            return Err(Error::invalid(format!("route edge index {e} out of range")));
        }
        for w in edges.windows(2) {
            if net.edge(w[0]).to != net.edge(w[1]).from {
                return Err(Error::invalid(format!(
                    "route edges {} and {} are not connected",
                    net.edge(w[0]).id,
                    net.edge(w[1]).id
                )));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn start_vertex(&self, net: &RoadNetwork) -> usize {
        net.edge(self.edges[0]).from
    }

    pub fn end_vertex(&self, net: &RoadNetwork) -> usize {
        net.edge(*self.edges.last().expect("non-empty")).to
    }

    /// `(edge, M(P, e))` pairs sorted by edge.
    pub fn multiplicities(&self) -> Vec<(usize, u32)> {
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        let mut out: Vec<(usize, u32)> = Vec::new();
        for e in sorted {
            match out.last_mut() {
                Some((last, m)) if *last == e => *m += 1,
                _ => out.push((e, 1)),
            }
        }
        out
    }

    pub fn multiplicity(&self, e: usize) -> u32 {
        self.edges.iter().filter(|&&x| x == e).count() as u32
    }

    /// Vertex positions along the route.
    pub fn polyline(&self, net: &RoadNetwork) -> Vec<crate::geometry::Point> {
        let mut pts = Vec::with_capacity(self.edges.len() + 1);
        pts.push(net.pos(self.start_vertex(net)));
        pts.extend(self.edges.iter().map(|&e| net.pos(net.edge(e).to)));
        pts
    }

    pub fn is_simple(&self, net: &RoadNetwork) -> bool {
        let mut seen = std::collections::HashSet::new();
        seen.insert(self.start_vertex(net));
        self.edges.iter().all(|&e| seen.insert(net.edge(e).to))
    }
}

/// A weighted set of routes `(P, c)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    routes: Vec<Route>,
    coefficients: Vec<f64>,
    sources: Vec<Option<String>>,
}

impl Reconstruction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, route: Route, coefficient: f64, source: Option<String>) {
        assert!(coefficient >= 0.0 && coefficient.is_finite(), "coefficient must be a nonnegative number");
        self.routes.push(route);
        self.coefficients.push(coefficient);
        self.sources.push(source);
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn sources(&self) -> &[Option<String>] {
        &self.sources
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Route, f64, Option<&str>)> {
        self.routes
            .iter()
            .zip(&self.coefficients)
            .zip(&self.sources)
            .map(|((r, &c), s)| (r, c, s.as_deref()))
    }

    pub fn set_coefficients(&mut self, coefficients: Vec<f64>) {
        assert_eq!(coefficients.len(), self.routes.len());
        assert!(coefficients.iter().all(|c| *c >= 0.0));
        self.coefficients = coefficients;
    }

    /// Start vertices `S_P` of the basis.
    pub fn start_vertices(&self, net: &RoadNetwork) -> Vec<usize> {
        let mut v: Vec<usize> = self.routes.iter().map(|r| r.start_vertex(net)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// End vertices `T_P` of the basis.
    pub fn end_vertices(&self, net: &RoadNetwork) -> Vec<usize> {
        let mut v: Vec<usize> = self.routes.iter().map(|r| r.end_vertex(net)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Indices sorted by decreasing coefficient, ties by position.
    pub fn order_by_coefficient(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.coefficients[b].total_cmp(&self.coefficients[a]).then(a.cmp(&b)));
        idx
    }
}

/// `f(e) = sum_P M(P, e) c(P)` over `edge_count` edges.
pub fn reconstructed_flow(rec: &Reconstruction, edge_count: usize) -> Vec<f64> {
    let mut f = vec![0.0; edge_count];
    for (route, c, _) in rec.iter() {
        for &e in route.edges() {
            f[e] += c;
        }
    }
    f
}

pub fn residual(phi: &FlowField, rec: &Reconstruction) -> ResidualField {
    let f = reconstructed_flow(rec, phi.len());
    ResidualField::new(phi.counts().iter().zip(&f).map(|(&p, &x)| p as f64 - x).collect())
}

/// Squared flow deviation over all edges.
pub fn deviation(phi: &FlowField, rec: &Reconstruction) -> f64 {
    residual(phi, rec).sum_squares()
}

/// Change in deviation when adding `c` units of `route` to a reconstruction
/// with residual `r`.
pub fn deviation_delta(r: &ResidualField, route: &Route, c: f64) -> f64 {
    assert!(c >= 0.0);
    -c * route
        .multiplicities()
        .into_iter()
        .map(|(e, m)| {
            let m = m as f64;
            m * (2.0 * r.get(e) - m * c)
        })
        .sum::<f64>()
}

/// Merges duplicate routes into their first occurrence (summing
/// coefficients) and drops routes with coefficient at most `tol`.
pub fn prune(rec: &Reconstruction, tol: f64) -> Reconstruction {
    let mut first: HashMap<&Route, usize> = HashMap::new();
    let mut merged = Reconstruction::new();
    for (route, c, src) in rec.iter() {
        match first.get(route) {
            Some(&i) => merged.coefficients[i] += c,
            None => {
                first.insert(route, merged.len());
                merged.push(route.clone(), c, src.map(str::to_owned));
            }
        }
    }
    let mut out = Reconstruction::new();
    for (route, c, src) in merged.iter() {
        if c > tol {
            out.push(route.clone(), c, src.map(str::to_owned));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::network::fixtures::{build, f1};

    pub fn xyz() -> RoadNetwork {
        build(
            &[("p", 0.0, 0.0), ("q", 1.0, 0.0), ("r", 2.0, 0.0), ("s", 3.0, 0.0)],
            &[("x", "p", "q"), ("y", "q", "r"), ("z", "r", "s")],
        )
    }

    fn one(net: &RoadNetwork, edges: Vec<usize>, c: f64) -> Reconstruction {
        let mut r = Reconstruction::new();
        r.push(Route::new(net, edges).unwrap(), c, None);
        r
    }

    #[test]
    fn flow_sums_multiplicities() {
        let net = f1();
        assert_eq!(reconstructed_flow(&Reconstruction::new(), 2), vec![0.0, 0.0]);
        assert_eq!(reconstructed_flow(&one(&net, vec![0, 1], 3.0), 2), vec![3.0, 3.0]);
        let loopy = build(&[("a", 0.0, 0.0), ("b", 1.0, 0.0)], &[("ab", "a", "b"), ("ba", "b", "a")]);
        assert_eq!(reconstructed_flow(&one(&loopy, vec![0, 1, 0], 1.5), 2), vec![3.0, 1.5]);
    }

    #[test]
    fn deviation_and_residual() {
        let net = f1();
        let phi = FlowField::from_counts(vec![3, 3]);
        assert_eq!(deviation(&phi, &Reconstruction::new()), 18.0);
        assert_eq!(deviation(&phi, &one(&net, vec![0, 1], 3.0)), 0.0);
        assert_eq!(deviation(&FlowField::from_counts(vec![3, 0]), &one(&net, vec![0], 2.0)), 1.0);
        assert_eq!(residual(&phi, &one(&net, vec![0, 1], 4.0)).values(), &[-1.0, -1.0]);
    }

    #[test]
    fn delta_examples() {
        let net = f1();
        let r = ResidualField::new(vec![3.0, 0.0]);
        assert_eq!(deviation_delta(&r, &Route::new(&net, vec![0]).unwrap(), 2.0), -8.0);
        assert_eq!(deviation_delta(&r, &Route::new(&net, vec![0]).unwrap(), 0.0), 0.0);
        let loopy = build(&[("a", 0.0, 0.0), ("b", 1.0, 0.0)], &[("ab", "a", "b"), ("ba", "b", "a")]);
        let r = ResidualField::new(vec![4.0, 0.0]);
        // Route ab, ba, ab with the return edge at zero residual.
        let d = deviation_delta(&r, &Route::new(&loopy, vec![0, 1, 0]).unwrap(), 1.0);
        assert_eq!(d, -12.0 + 1.0);
    }

    #[test]
    fn route_validation() {
        let net = f1();
        assert!(Route::new(&net, vec![]).is_err());
        assert!(Route::new(&net, vec![1, 0]).is_err());
        assert!(Route::new(&net, vec![7]).is_err());
        assert_eq!(Route::new(&net, vec![0, 1]).unwrap().multiplicities(), vec![(0, 1), (1, 1)]);
    }

    #[test]
    fn prune_merges_and_drops() {
        let net = xyz();
        let mut rec = Reconstruction::new();
        rec.push(Route::new(&net, vec![0, 1]).unwrap(), 1.0, Some("a".into()));
        rec.push(Route::new(&net, vec![1, 2]).unwrap(), 0.0, Some("b".into()));
        rec.push(Route::new(&net, vec![0, 1]).unwrap(), 2.0, Some("c".into()));
        let p = prune(&rec, DEFAULT_TOL);
        assert_eq!(p.len(), 1);
        assert_eq!(p.coefficients(), &[3.0]);
        assert_eq!(p.sources()[0].as_deref(), Some("a"));
        assert_eq!(reconstructed_flow(&p, 3), reconstructed_flow(&rec, 3));
    }
}
