use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{prune, residual, solve_coefficients_warm, Reconstruction, Route, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::geometry::Trajectory;
use crate::mapmatch::{build_manifold, extend_endpoints, match_decision, match_through_edge, match_weighted, MatchResult};
use crate::network::{FlowField, ResidualField, RoadNetwork};

/// Candidate route generator per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Fr,
    Efr,
    Wfr,
    Wefr,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Fr, Variant::Efr, Variant::Wfr, Variant::Wefr];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fr => "fr",
            Variant::Efr => "efr",
            Variant::Wfr => "wfr",
            Variant::Wefr => "wefr",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown route variant {s:?}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FRConfig {
    pub eps: f64,
    pub iterations: usize,
    pub k: usize,
    pub variant: Variant,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FRConfig {
    fn default() -> Self {
        Self {
            eps: 100.0,
            iterations: 5,
            k: 2,
            variant: Variant::Wefr,
            tol: DEFAULT_TOL,
            seed: 0,
        }
    }
}

impl FRConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.eps)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iteration count must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub deviation: f64,
    pub basis_size: usize,
    pub new_routes: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FrechetRoutesOutput {
    pub reconstruction: Reconstruction,
    pub deviation: f64,
    pub telemetry: Vec<IterationStats>,
}

/// The `k` corridor edges of highest positive residual, ties by edge id.
fn top_edges(corridor_edges: &[usize], r: &ResidualField, k: usize) -> Vec<usize> {
    let mut edges: Vec<usize> = corridor_edges.iter().copied().filter(|&e| r.get(e) > 0.0).collect();
    edges.sort_by(|&a, &b| r.get(b).total_cmp(&r.get(a)).then(a.cmp(&b)));
    edges.truncate(k);
    edges
}

/// Candidate routes for one trajectory, distinct and in generation order.
pub fn generate_basis_routes(t: &Trajectory, r: &ResidualField, net: &RoadNetwork, cfg: &FRConfig) -> Vec<Route> {
    let Some(m) = build_manifold(net, t, cfg.eps) else {
        log::warn!("trajectory {} has no network coverage at eps {}, skipped", t.id(), cfg.eps);
        return Vec::new();
    };
    let mut found: Vec<MatchResult> = Vec::new();
    match cfg.variant {
        Variant::Fr => found.extend(match_decision(&m)),
        Variant::Wfr => found.extend(match_weighted(&m, r)),
        Variant::Efr | Variant::Wefr => {
            for e in top_edges(&m.corridor().edges, r, cfg.k) {
                found.extend(match_through_edge(&m, e));
            }
            if cfg.variant == Variant::Wefr {
                found.extend(match_weighted(&m, r));
            }
        }
    }
    let mut seen = HashSet::new();
    found
        .iter()
        .map(|p| extend_endpoints(p, t, cfg.eps, r, net))
        .filter_map(|p| Route::new(net, p.route).ok())
        .filter(|route| seen.insert(route.clone()))
        .collect()
}

/// Iteratively grows a route basis from the trajectories and fits
/// nonnegative coefficients to the observed flow.
pub fn frechet_routes(
    net: &RoadNetwork,
    phi: &FlowField,
    trajectories: &[Trajectory],
    cfg: &FRConfig,
) -> Result<FrechetRoutesOutput> {
    cfg.validate()?;
    if phi.len() != net.edge_count() {
        return Err(Error::invalid("flow field does not match the network"));
    }
    let mut rec = Reconstruction::new();
    let mut r = ResidualField::from_flow(phi);
    let mut telemetry = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        let started = Instant::now();
        let batches: Vec<Vec<Route>> = trajectories
            .par_iter()
            .map(|t| generate_basis_routes(t, &r, net, cfg))
            .collect();
        let known: HashSet<Route> = rec.routes().iter().cloned().collect();
        let mut added = HashSet::new();
        let mut grown = rec.clone();
        for (t, routes) in trajectories.iter().zip(batches) {
            for route in routes {
                if !known.contains(&route) && added.insert(route.clone()) {
                    grown.push(route, 0.0, Some(t.id().to_owned()));
                }
            }
        }
        let new_routes = added.len();
        let solution = solve_coefficients_warm(grown.routes(), phi, cfg.tol, rec.coefficients())?;
        grown.set_coefficients(solution.coefficients);
        rec = prune(&grown, cfg.tol);
        r = residual(phi, &rec);
        let deviation = r.sum_squares();
        log::info!(
            "iteration {iteration}: {new_routes} new routes, basis {}, deviation {deviation:.6e}",
            rec.len()
        );
        telemetry.push(IterationStats {
            iteration,
            deviation,
            basis_size: rec.len(),
            new_routes,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    let deviation = r.sum_squares();
    Ok(FrechetRoutesOutput {
        reconstruction: rec,
        deviation,
        telemetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::network::fixtures::f2;

    fn traj(id: &str, pts: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(id, pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    fn cfg(variant: Variant, eps: f64, iterations: usize, k: usize) -> FRConfig {
        FRConfig { eps, iterations, k, variant, ..Default::default() }
    }

    #[test]
    fn efr_and_wfr_on_f2() {
        let net = f2();
        let t1 = traj("t1", &[(0.0, 0.0), (200.0, 0.0)]);
        let r = ResidualField::new(vec![2.0, 2.0, 1.0, 1.0]);
        let efr = generate_basis_routes(&t1, &r, &net, &cfg(Variant::Efr, 100.0, 1, 2));
        assert_eq!(efr.iter().map(|p| p.edges().to_vec()).collect::<Vec<_>>(), vec![vec![0, 1]]);
        let wfr = generate_basis_routes(&t1, &r, &net, &cfg(Variant::Wfr, 100.0, 1, 2));
        assert_eq!(wfr[0].edges(), &[0, 1]);
        let none = generate_basis_routes(&t1, &ResidualField::new(vec![0.0, -1.0, 0.0, 0.0]), &net, &cfg(Variant::Efr, 100.0, 1, 2));
        assert!(none.is_empty());
    }

    #[test]
    fn wefr_exact_cover_on_f2() {
        let net = f2();
        let phi = FlowField::from_counts(vec![2, 2, 1, 1]);
        let ts = vec![
            traj("t1", &[(0.0, 0.0), (200.0, 0.0)]),
            traj("t2", &[(0.0, 0.0), (100.0, 80.0), (200.0, 0.0)]),
        ];
        let out = frechet_routes(&net, &phi, &ts, &cfg(Variant::Wefr, 30.0, 2, 2)).unwrap();
        let mut got: Vec<(Vec<usize>, f64)> =
            out.reconstruction.iter().map(|(p, c, _)| (p.edges().to_vec(), c)).collect();
        got.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].0, vec![0, 1]);
        assert_eq!(got[1].0, vec![2, 3]);
        assert!((got[0].1 - 2.0).abs() < 1e-9 && (got[1].1 - 1.0).abs() < 1e-9);
        assert!(out.deviation < 1e-12);
        assert_eq!(out.telemetry.len(), 2);
    }

    #[test]
    fn no_trajectories() {
        let net = f2();
        let phi = FlowField::from_counts(vec![2, 2, 1, 1]);
        let out = frechet_routes(&net, &phi, &[], &cfg(Variant::Fr, 30.0, 1, 2)).unwrap();
        assert!(out.reconstruction.is_empty());
        assert_eq!(out.deviation, 10.0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("gmcf".parse::<Variant>().is_err());
    }
}
