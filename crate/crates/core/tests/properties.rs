use flowroutes::datagen::{generate_scenario, grid_network, ScenarioConfig};
use flowroutes::flowopt::{decompose, merge_cycles, EdgeFlow, TerminalSpec};
use flowroutes::geometry::{frechet_decision, frechet_value, load_trajectories, write_trajectories, Point, DEFAULT_REL_TOL};
use flowroutes::network::{load_flow_field, load_network, write_flow_field, write_network, EdgeSpec, Vertex};
use flowroutes::reconstruct::{
    deviation, deviation_delta, load_reconstruction, prune, reconstructed_flow, residual, solve_coefficients,
    solve_coefficients_warm, write_reconstruction, DEFAULT_TOL,
};
use flowroutes::{FlowField, Reconstruction, RoadNetwork, Route, Trajectory};
use proptest::prelude::*;

fn pt() -> impl Strategy<Value = Point> {
    (-100.0f64..100.0, -100.0f64..100.0).prop_map(|(x, y)| Point::new(x, y))
}

fn curve() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(pt(), 2..7)
}

fn discrete(p: &[Point], q: &[Point]) -> f64 {
    let mut ca = vec![vec![0.0f64; q.len()]; p.len()];
    for i in 0..p.len() {
        for j in 0..q.len() {
            let d = p[i].dist(q[j]);
            ca[i][j] = match (i, j) {
                (0, 0) => d,
                (0, _) => ca[0][j - 1].max(d),
                (_, 0) => ca[i - 1][0].max(d),
                _ => ca[i - 1][j].min(ca[i][j - 1]).min(ca[i - 1][j - 1]).max(d),
            };
        }
    }
    ca[p.len() - 1][q.len() - 1]
}

fn dense(pts: &[Point], h: f64) -> Vec<Point> {
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let n = (w[0].dist(w[1]) / h).ceil().max(1.0) as usize;
        out.extend((1..=n).map(|k| w[0].lerp(w[1], k as f64 / n as f64)));
    }
    out
}

/// A line network v0 -> v1 -> ... with a few chords, and random walks on it.
fn chain(n: usize, chords: &[(usize, usize)]) -> RoadNetwork {
    let vertices = (0..n).map(|i| Vertex::new(format!("v{i:02}"), i as f64, 0.0)).collect();
    let mut edges: Vec<EdgeSpec> =
        (0..n - 1).map(|i| EdgeSpec::new(format!("s{i:02}"), format!("v{i:02}"), format!("v{:02}", i + 1))).collect();
    for (k, &(a, b)) in chords.iter().enumerate() {
        if a % n != b % n {
            edges.push(EdgeSpec::new(format!("c{k:02}"), format!("v{:02}", a % n), format!("v{:02}", b % n)));
        }
    }
    RoadNetwork::new(vertices, edges).unwrap()
}

fn walk(net: &RoadNetwork, start: usize, choices: &[usize]) -> Option<Route> {
    let mut edges = vec![start % net.edge_count()];
    for &c in choices {
        let out = net.out_edges(net.edge(*edges.last().unwrap()).to);
        if out.is_empty() {
            break;
        }
        edges.push(out[c % out.len()]);
    }
    Route::new(net, edges).ok()
}

prop_compose! {
    fn basis()(
        n in 3usize..9,
        chords in prop::collection::vec((0usize..9, 0usize..9), 0..8),
        walks in prop::collection::vec((0usize..40, prop::collection::vec(0usize..4, 0..5)), 1..8),
        counts in prop::collection::vec(0u64..12, 40),
    ) -> (RoadNetwork, Vec<Route>, FlowField) {
        let net = chain(n, &chords);
        let mut routes: Vec<Route> = Vec::new();
        for (s, c) in walks {
            if let Some(r) = walk(&net, s, &c) {
                if !routes.contains(&r) {
                    routes.push(r);
                }
            }
        }
        let phi = FlowField::from_counts(counts[..net.edge_count()].to_vec());
        (net, routes, phi)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frechet_sandwiched_by_densified_discrete(p in curve(), q in curve()) {
        let all: Vec<Point> = p.iter().chain(&q).copied().collect();
        let diam = all.iter().flat_map(|a| all.iter().map(move |b| a.dist(*b))).fold(0.0, f64::max);
        prop_assume!(diam > 1e-6);
        let h = 0.01 * diam;
        let d = frechet_value(&p, &q, DEFAULT_REL_TOL);
        let gap = discrete(&dense(&p, h), &dense(&q, h)) - d;
        prop_assert!(gap >= -DEFAULT_REL_TOL * d - 1e-9, "gap {gap}, d {d}");
        prop_assert!(gap <= h + DEFAULT_REL_TOL * d + 1e-9, "gap {gap}, h {h}");
    }

    #[test]
    fn frechet_symmetric_and_consistent_with_decision(p in curve(), q in curve()) {
        let d = frechet_value(&p, &q, DEFAULT_REL_TOL);
        let e = frechet_value(&q, &p, DEFAULT_REL_TOL);
        prop_assert!((d - e).abs() <= 2.0 * DEFAULT_REL_TOL * d.max(e) + 1e-9);
        prop_assert!(frechet_decision(&p, &q, d * (1.0 + 2.0 * DEFAULT_REL_TOL) + 1e-9));
        let ends = p[0].dist(q[0]).max(p[p.len() - 1].dist(q[q.len() - 1]));
        prop_assert!(d >= ends * (1.0 - DEFAULT_REL_TOL) - 1e-9);
        if d > 1e-6 {
            prop_assert!(!frechet_decision(&p, &q, d * (1.0 - 2.0 * DEFAULT_REL_TOL)));
        }
    }

    #[test]
    fn nnls_is_optimal_and_warm_start_agrees((_net, routes, phi) in basis(), noise in prop::collection::vec(-1.0f64..1.0, 8)) {
        prop_assume!(!routes.is_empty());
        let sol = solve_coefficients(&routes, &phi, DEFAULT_TOL).unwrap();
        let c = &sol.coefficients;
        prop_assert!(c.iter().all(|&x| x >= 0.0));
        let f = |c: &[f64]| {
            let mut rec = Reconstruction::new();
            for (r, &x) in routes.iter().zip(c) {
                rec.push(r.clone(), x, None);
            }
            deviation(&phi, &rec)
        };
        let best = f(c);
        // Gradient conditions, scaled by |phi|.
        let r = sol.residual.values();
        let scale = phi.sum_squares().max(1.0).sqrt();
        for (route, &x) in routes.iter().zip(c) {
            let g: f64 = route.edges().iter().map(|&e| -2.0 * r[e]).sum();
            if x > 0.0 {
                prop_assert!(g.abs() <= 1e-6 * scale, "g {g} at c {x}");
            } else {
                prop_assert!(g >= -1e-6 * scale, "g {g} at zero");
            }
        }
        let perturbed: Vec<f64> = c.iter().zip(noise.iter().cycle()).map(|(&x, &n)| (x + n).max(0.0)).collect();
        prop_assert!(best <= f(&perturbed) + 1e-9);
        let warm = solve_coefficients_warm(&routes, &phi, DEFAULT_TOL, &perturbed).unwrap();
        prop_assert!((f(&warm.coefficients) - best).abs() <= 1e-7 * phi.sum_squares().max(1.0));
    }

    #[test]
    fn deviation_delta_matches_recomputation((_net, routes, phi) in basis(), cs in prop::collection::vec(0.0f64..5.0, 9)) {
        prop_assume!(routes.len() >= 2);
        let mut rec = Reconstruction::new();
        for (r, &c) in routes[1..].iter().zip(&cs) {
            rec.push(r.clone(), c, None);
        }
        let before = deviation(&phi, &rec);
        let delta = deviation_delta(&residual(&phi, &rec), &routes[0], cs[8]);
        rec.push(routes[0].clone(), cs[8], None);
        let after = deviation(&phi, &rec);
        prop_assert!((after - before - delta).abs() <= 1e-9 * before.max(1.0));
    }

    #[test]
    fn prune_keeps_flow_and_removes_duplicates((net, routes, _phi) in basis(), picks in prop::collection::vec((0usize..8, 0.0f64..3.0), 1..12)) {
        prop_assume!(!routes.is_empty());
        let mut rec = Reconstruction::new();
        for (i, c) in picks {
            rec.push(routes[i % routes.len()].clone(), if c < 0.5 { 0.0 } else { c }, None);
        }
        let pruned = prune(&rec, 1e-12);
        let (a, b) = (reconstructed_flow(&rec, net.edge_count()), reconstructed_flow(&pruned, net.edge_count()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let distinct: std::collections::HashSet<&Route> = pruned.routes().iter().collect();
        prop_assert_eq!(distinct.len(), pruned.len());
        prop_assert!(pruned.coefficients().iter().all(|&c| c > 1e-12));
    }

    #[test]
    fn decomposition_and_merge((net, routes, _phi) in basis(), values in prop::collection::vec(0.1f64..10.0, 8)) {
        prop_assume!(!routes.is_empty());
        let mut flow = vec![0.0; net.edge_count()];
        let (mut sources, mut sinks) = (Vec::new(), Vec::new());
        for (r, &c) in routes.iter().zip(&values) {
            for &e in r.edges() {
                flow[e] += c;
            }
            let (s, t) = (r.start_vertex(&net), r.end_vertex(&net));
            if s != t {
                sources.push(s);
                sinks.push(t);
            }
        }
        let terminals = TerminalSpec::new(sources, sinks);
        let d = decompose(&net, &EdgeFlow { values: flow.clone() }, &terminals).unwrap();
        prop_assert!(d.piece_count() <= net.edge_count());
        let back = d.edge_flow(net.edge_count());
        for (x, y) in flow.iter().zip(&back.values) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        // Merged routes are valid and never explain less flow than the paths.
        let merged = merge_cycles(&net, &d, Some("t"));
        prop_assert!(merged.reconstruction.coefficients().iter().all(|&c| c > 0.0));
        let paths: f64 = d.paths.iter().map(|(p, c)| p.len() as f64 * c).sum();
        let total: f64 = reconstructed_flow(&merged.reconstruction, net.edge_count()).iter().sum();
        prop_assert!(total >= paths - 1e-9);
        for r in merged.reconstruction.routes() {
            prop_assert!(Route::new(&net, r.edges().to_vec()).is_ok());
        }
    }
}

#[test]
fn bundle_files_round_trip() {
    let net = grid_network(4, 5, 100.0);
    let s = generate_scenario(&net, &ScenarioConfig { n_routes: 12, gamma: 30.0, alpha: 0.5, seed: 4 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    write_network(p("n.json"), &net).unwrap();
    let net2 = load_network(p("n.json")).unwrap();
    assert_eq!(net2.vertices(), net.vertices());
    assert_eq!(net2.edges(), net.edges());
    write_flow_field(p("f.csv"), &net, &s.flow).unwrap();
    assert_eq!(load_flow_field(p("f.csv"), &net).unwrap(), s.flow);
    write_trajectories(p("t.csv"), &s.trajectories).unwrap();
    let back: Vec<Trajectory> = load_trajectories(p("t.csv")).unwrap();
    assert_eq!(back.len(), s.trajectories.len());
    for (a, b) in back.iter().zip(&s.trajectories) {
        assert_eq!(a.id(), b.id());
        assert_eq!(a.points(), b.points());
    }
    let mut rec = Reconstruction::new();
    for (i, r) in s.ground_truth.iter().enumerate() {
        rec.push(r.clone(), 0.5 + i as f64, Some(format!("t{i}")));
    }
    write_reconstruction(p("r.json"), &net, &rec, 1.25).unwrap();
    let (rec2, dev) = load_reconstruction(p("r.json"), &net).unwrap();
    assert_eq!(dev, 1.25);
    assert_eq!(rec2.routes(), rec.routes());
    assert_eq!(rec2.coefficients(), rec.coefficients());
    assert_eq!(rec2.sources(), rec.sources());
}

#[test]
fn paper_scale_generation() {
    // 5000 perturbed shortest paths on a city-sized grid.
    let net = grid_network(60, 60, 100.0);
    let start = std::time::Instant::now();
    let s = generate_scenario(&net, &ScenarioConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(s.ground_truth.len(), 5000);
    assert_eq!(s.trajectories.len(), 5000);
    assert!(secs < 60.0, "{secs}s");
}
