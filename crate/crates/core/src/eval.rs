//! Evaluation measures: deviation, realism, coverage, complexity and time.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{frechet_decision, frechet_value, Point, Trajectory};
use crate::network::io::write_bytes;
use crate::network::{FlowField, RoadNetwork};
use crate::reconstruct::{deviation, Reconstruction, Route};

/// Routes ranked by coefficient that enter realism and coverage.
pub const DEFAULT_TOP_N: usize = 2500;
/// Full-basis measures are also reported up to this basis size.
pub const FULL_BASIS_LIMIT: usize = 10_000;

pub fn metric_deviation(phi: &FlowField, rec: &Reconstruction) -> f64 {
    deviation(phi, rec)
}

/// Distance from `p` to the closest candidate. Candidates are visited in
/// order of the endpoint lower bound; the decision procedure at the current
/// best skips candidates that cannot improve it.
fn nearest(p: &[Point], candidates: &[&[Point]], rel_tol: f64) -> f64 {
    let mut order: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let lb = p[0].dist(q[0]).max(p[p.len() - 1].dist(q[q.len() - 1]));
            (lb, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = f64::INFINITY;
    for (lb, i) in order {
        if lb >= best {
            break;
        }
        let q = candidates[i];
        if best.is_finite() && !frechet_decision(p, q, best) {
            continue;
        }
        best = best.min(frechet_value(p, q, rel_tol));
    }
    best
}

fn top_routes(rec: &Reconstruction, top_n: usize) -> Vec<usize> {
    let mut idx = rec.order_by_coefficient();
    idx.truncate(top_n);
    idx
}

/// Coefficient-weighted mean distance from the top `top_n` routes to their
/// nearest trajectory. `None` for an empty basis or trajectory set.
pub fn metric_realism(
    net: &RoadNetwork,
    rec: &Reconstruction,
    trajectories: &[Trajectory],
    rel_tol: f64,
    top_n: usize,
) -> Option<f64> {
    if rec.is_empty() || trajectories.is_empty() {
        return None;
    }
    let idx = top_routes(rec, top_n);
    let cands: Vec<&[Point]> = trajectories.iter().map(|t| t.points()).collect();
    let dists: Vec<f64> = idx
        .par_iter()
        .map(|&i| nearest(&rec.routes()[i].polyline(net), &cands, rel_tol))
        .collect();
    let weight: f64 = idx.iter().map(|&i| rec.coefficients()[i]).sum();
    if weight <= 0.0 {
        return None;
    }
    let total: f64 = idx.iter().zip(&dists).map(|(&i, d)| rec.coefficients()[i] * d).sum();
    Some(total / weight)
}

/// Mean distance from each ground-truth route to the nearest of the top
/// `top_n` basis routes. `None` for an empty basis or ground truth.
pub fn metric_coverage(
    net: &RoadNetwork,
    ground_truth: &[Route],
    rec: &Reconstruction,
    rel_tol: f64,
    top_n: usize,
) -> Option<f64> {
    if rec.is_empty() || ground_truth.is_empty() {
        return None;
    }
    let polys: Vec<Vec<Point>> = top_routes(rec, top_n).iter().map(|&i| rec.routes()[i].polyline(net)).collect();
    let cands: Vec<&[Point]> = polys.iter().map(|p| p.as_slice()).collect();
    let total: f64 = ground_truth
        .par_iter()
        .map(|g| nearest(&g.polyline(net), &cands, rel_tol))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Some(total / ground_truth.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub rel_tol: f64,
    pub top_n: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            rel_tol: crate::geometry::DEFAULT_REL_TOL,
            top_n: DEFAULT_TOP_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub deviation: f64,
    pub realism: Option<f64>,
    pub coverage: Option<f64>,
    pub complexity: usize,
    pub running_time: f64,
    pub top_n: usize,
    pub realism_full: Option<f64>,
    pub coverage_full: Option<f64>,
}

pub struct EvalInput<'a> {
    pub net: &'a RoadNetwork,
    pub phi: &'a FlowField,
    pub rec: &'a Reconstruction,
    pub trajectories: &'a [Trajectory],
    pub ground_truth: Option<&'a [Route]>,
}

/// Assembles all measures for one reconstruction.
pub fn evaluate(input: &EvalInput, method: &str, trial: usize, seed: u64, running_time: f64, opts: EvalOptions) -> EvaluationReport {
    let EvalInput { net, phi, rec, trajectories, ground_truth } = *input;
    let realism = metric_realism(net, rec, trajectories, opts.rel_tol, opts.top_n);
    let coverage = ground_truth.and_then(|g| metric_coverage(net, g, rec, opts.rel_tol, opts.top_n));
    let full = rec.len() <= FULL_BASIS_LIMIT;
    let (realism_full, coverage_full) = if full && rec.len() > opts.top_n {
        (
            metric_realism(net, rec, trajectories, opts.rel_tol, usize::MAX),
            ground_truth.and_then(|g| metric_coverage(net, g, rec, opts.rel_tol, usize::MAX)),
        )
    } else if full {
        (realism, coverage)
    } else {
        (None, None)
    };
    EvaluationReport {
        method: method.to_owned(),
        trial,
        seed,
        deviation: metric_deviation(phi, rec),
        realism,
        coverage,
        complexity: rec.len(),
        running_time,
        top_n: opts.top_n,
        realism_full,
        coverage_full,
    }
}

/// Per-measure means over trials; optional measures average the trials
/// that have them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub method: String,
    pub trials: usize,
    pub deviation: f64,
    pub realism: Option<f64>,
    pub coverage: Option<f64>,
    pub complexity: f64,
    pub running_time: f64,
}

pub fn mean_report(reports: &[EvaluationReport]) -> Option<MeanReport> {
    let n = reports.len();
    if n == 0 {
        return None;
    }
    let mean = |f: &dyn Fn(&EvaluationReport) -> f64| reports.iter().map(f).sum::<f64>() / n as f64;
    let mean_opt = |f: &dyn Fn(&EvaluationReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Some(MeanReport {
        method: reports[0].method.clone(),
        trials: n,
        deviation: mean(&|r| r.deviation),
        realism: mean_opt(&|r| r.realism),
        coverage: mean_opt(&|r| r.coverage),
        complexity: mean(&|r| r.complexity as f64),
        running_time: mean(&|r| r.running_time),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub trials: Vec<EvaluationReport>,
    pub mean: Option<MeanReport>,
}

pub fn write_report_json(path: impl AsRef<Path>, file: &ReportFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file).expect("serializable");
    text.push('\n');
    write_bytes(path.as_ref(), text.as_bytes())
}

pub fn load_report_json(path: impl AsRef<Path>) -> Result<ReportFile> {
    let path = path.as_ref();
    let text = crate::network::io::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// One row per trial plus a `mean` row; empty cells for absent measures.
pub fn write_report_csv(path: impl AsRef<Path>, file: &ReportFile) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map(|x| format!("{:?}", x)).unwrap_or_default();
    let io = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    w.write_record(["method", "trial", "seed", "deviation", "realism", "coverage", "complexity", "running_time"])
        .map_err(io)?;
    for r in &file.trials {
        w.write_record([
            r.method.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            format!("{:?}", r.deviation),
            opt(r.realism),
            opt(r.coverage),
            r.complexity.to_string(),
            format!("{:?}", r.running_time),
        ])
        .map_err(io)?;
    }
    if let Some(m) = &file.mean {
        w.write_record([
            m.method.clone(),
            "mean".into(),
            String::new(),
            format!("{:?}", m.deviation),
            opt(m.realism),
            opt(m.coverage),
            format!("{:?}", m.complexity),
            format!("{:?}", m.running_time),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_bytes(path, &bytes)
}
