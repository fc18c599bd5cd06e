use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;

use flowroutes::datagen::{self, grid_network, FLOW_FILE, GROUND_TRUTH_FILE, NETWORK_FILE, TRAJECTORIES_FILE};
use flowroutes::eval::{evaluate, mean_report, write_report_csv, write_report_json, EvalInput, EvalOptions, EvaluationReport, ReportFile};
use flowroutes::flowopt::{mincost_reconstruction, MinCostMode, SolverOptions};
use flowroutes::geometry::{load_trajectories, DEFAULT_REL_TOL};
use flowroutes::network::{load_flow_field, load_network, write_edge_values};
use flowroutes::reconstruct::{frechet_routes, load_reconstruction, residual, write_reconstruction, FRConfig, IterationStats};
use flowroutes::{FlowField, Reconstruction, RoadNetwork, Route, Trajectory};

use crate::config::Params;

pub const RECONSTRUCTION_FILE: &str = "reconstruction.json";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const RESIDUAL_FILE: &str = "residual.csv";
pub const EDGE_FLOW_FILE: &str = "edge_flow.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

fn create_out(p: &Params) -> anyhow::Result<()> {
    fs::create_dir_all(p.out()).with_context(|| format!("creating {}", p.out().display()))
}

pub fn generate(p: &Params) -> anyhow::Result<()> {
    let net = match &p.network {
        Some(path) => load_network(path)?,
        None => grid_network(p.rows.unwrap(), p.cols.unwrap(), p.spacing.unwrap()),
    };
    let scenario = datagen::generate_scenario(&net, &p.scenario())?;
    create_out(p)?;
    datagen::write_bundle(p.out(), &net, &scenario)?;
    log::info!(
        "{} routes, {} sampled trajectories written to {}",
        scenario.ground_truth.len(),
        scenario.trajectories.len(),
        p.out().display()
    );
    p.write_manifest()
}

struct Bundle {
    net: RoadNetwork,
    phi: FlowField,
    trajectories: Vec<Trajectory>,
    ground_truth: Option<Vec<Route>>,
}

fn load_bundle(dir: &Path) -> anyhow::Result<Bundle> {
    let net = load_network(dir.join(NETWORK_FILE))?;
    let phi = load_flow_field(dir.join(FLOW_FILE), &net)?;
    let trajectories = load_trajectories(dir.join(TRAJECTORIES_FILE))?;
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let ground_truth = if gt_path.exists() {
        Some(load_reconstruction(&gt_path, &net)?.0.routes().to_vec())
    } else {
        log::warn!("{} has no ground truth, coverage is omitted", dir.display());
        None
    };
    Ok(Bundle { net, phi, trajectories, ground_truth })
}

enum Telemetry {
    Iterations(Vec<IterationStats>),
    Summary(Vec<(&'static str, String)>),
}

struct MethodRun {
    reconstruction: Reconstruction,
    deviation: f64,
    telemetry: Telemetry,
    edge_flow: Option<Vec<f64>>,
    seconds: f64,
}

fn run_method(b: &Bundle, trajectories: &[Trajectory], p: &Params) -> anyhow::Result<MethodRun> {
    let method = p.method.as_deref().expect("resolved");
    let eps = p.epsilon.expect("resolved");
    let tol = p.tol.expect("resolved");
    let start = Instant::now();
    let run = match method {
        "mcmcf" | "gmcf" => {
            let mode: MinCostMode = method.parse()?;
            let opts = SolverOptions { tol, ..SolverOptions::default() };
            let out = mincost_reconstruction(&b.net, &b.phi, trajectories, eps, mode, opts)?;
            let s = &out.solver;
            let summary = vec![
                ("objective", format!("{:?}", s.objective)),
                ("stationarity", format!("{:?}", s.stationarity)),
                ("rounds", s.rounds.to_string()),
                ("columns", s.columns.to_string()),
                ("active_columns", s.active_columns.to_string()),
                ("path_pieces", out.path_pieces.to_string()),
                ("cycle_pieces", out.cycle_pieces.to_string()),
                ("merged_cycles", out.merge.merged_cycles.to_string()),
                ("dropped_cycles", out.merge.dropped_cycles.to_string()),
                ("dropped_mass", format!("{:?}", out.merge.dropped_mass)),
                ("rounding_excess", format!("{:?}", out.merge.rounding_excess)),
            ];
            MethodRun {
                reconstruction: out.reconstruction,
                deviation: out.deviation,
                telemetry: Telemetry::Summary(summary),
                edge_flow: Some(out.edge_flow),
                seconds: 0.0,
            }
        }
        _ => {
            let cfg = FRConfig {
                eps,
                iterations: p.iterations.expect("resolved"),
                k: p.k.unwrap_or(0),
                variant: method.parse()?,
                tol,
                seed: p.seed.expect("resolved"),
            };
            let out = frechet_routes(&b.net, &b.phi, trajectories, &cfg)?;
            MethodRun {
                reconstruction: out.reconstruction,
                deviation: out.deviation,
                telemetry: Telemetry::Iterations(out.telemetry),
                edge_flow: None,
                seconds: 0.0,
            }
        }
    };
    Ok(MethodRun { seconds: start.elapsed().as_secs_f64(), ..run })
}

fn write_telemetry(path: &Path, t: &Telemetry, seconds: f64) -> anyhow::Result<()> {
    let mut text = String::new();
    match t {
        Telemetry::Iterations(rows) => {
            text.push_str("iteration,deviation,basis_size,new_routes,wall_seconds\n");
            for r in rows {
                text.push_str(&format!(
                    "{},{:?},{},{},{:?}\n",
                    r.iteration, r.deviation, r.basis_size, r.new_routes, r.wall_seconds
                ));
            }
        }
        Telemetry::Summary(rows) => {
            text.push_str("metric,value\n");
            for (k, v) in rows {
                text.push_str(&format!("{k},{v}\n"));
            }
            text.push_str(&format!("wall_seconds,{seconds:?}\n"));
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn eval_options(p: &Params) -> EvalOptions {
    EvalOptions {
        rel_tol: DEFAULT_REL_TOL,
        top_n: p.top_n.expect("resolved"),
    }
}

fn write_reports(p: &Params, trials: Vec<EvaluationReport>) -> anyhow::Result<ReportFile> {
    let mean = mean_report(&trials);
    let file = ReportFile { trials, mean };
    write_report_json(p.out().join(REPORT_JSON), &file)?;
    write_report_csv(p.out().join(REPORT_CSV), &file)?;
    Ok(file)
}

pub fn reconstruct(p: &Params) -> anyhow::Result<()> {
    let b = load_bundle(p.bundle())?;
    let run = run_method(&b, &b.trajectories, p)?;
    create_out(p)?;
    let out = p.out();
    write_reconstruction(out.join(RECONSTRUCTION_FILE), &b.net, &run.reconstruction, run.deviation)?;
    write_telemetry(&out.join(TELEMETRY_FILE), &run.telemetry, run.seconds)?;
    let r = residual(&b.phi, &run.reconstruction);
    write_edge_values(out.join(RESIDUAL_FILE), &b.net, "residual", r.values())?;
    if let Some(flow) = &run.edge_flow {
        write_edge_values(out.join(EDGE_FLOW_FILE), &b.net, "flow", flow)?;
    }
    let input = EvalInput {
        net: &b.net,
        phi: &b.phi,
        rec: &run.reconstruction,
        trajectories: &b.trajectories,
        ground_truth: b.ground_truth.as_deref(),
    };
    let report = evaluate(&input, p.method.as_deref().unwrap(), 0, p.seed.unwrap(), run.seconds, eval_options(p));
    log::info!(
        "{}: deviation {:.6e}, {} routes, {:.2}s",
        report.method,
        report.deviation,
        report.complexity,
        run.seconds
    );
    write_reports(p, vec![report])?;
    p.write_manifest()
}

pub fn evaluate_cmd(p: &Params) -> anyhow::Result<()> {
    let b = load_bundle(p.bundle())?;
    let opts = eval_options(p);
    let seed = p.seed.unwrap();
    let trials = if let Some(path) = &p.reconstruction {
        let (rec, _) = load_reconstruction(path, &b.net)?;
        let input = EvalInput {
            net: &b.net,
            phi: &b.phi,
            rec: &rec,
            trajectories: &b.trajectories,
            ground_truth: b.ground_truth.as_deref(),
        };
        vec![evaluate(&input, "file", 0, seed, 0.0, opts)]
    } else {
        let alpha = p.alpha.unwrap();
        let trial = |i: usize| -> anyhow::Result<EvaluationReport> {
            let trial_seed = seed.wrapping_add(i as u64);
            let sample = if alpha < 1.0 {
                datagen::sample_trajectories(&b.trajectories, alpha, trial_seed)
            } else {
                b.trajectories.clone()
            };
            let run = run_method(&b, &sample, &Params { seed: Some(trial_seed), ..p.clone() })?;
            let input = EvalInput {
                net: &b.net,
                phi: &b.phi,
                rec: &run.reconstruction,
                trajectories: &sample,
                ground_truth: b.ground_truth.as_deref(),
            };
            Ok(evaluate(&input, p.method.as_deref().unwrap(), i, trial_seed, run.seconds, opts))
        };
        let n = p.trials.unwrap();
        if p.parallel_trials == Some(true) {
            (0..n).into_par_iter().map(trial).collect::<anyhow::Result<_>>()?
        } else {
            (0..n).map(trial).collect::<anyhow::Result<_>>()?
        }
    };
    create_out(p)?;
    let file = write_reports(p, trials)?;
    if let Some(m) = &file.mean {
        log::info!("{}: mean deviation {:.6e} over {} trials", m.method, m.deviation, m.trials);
    }
    p.write_manifest()
}
