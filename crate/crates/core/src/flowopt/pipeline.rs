use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::merge::MergeStats;
use super::{decompose, merge_cycles, solve_gmcf, solve_mcmcf, Commodity, SolverOptions, SolverReport, TerminalSpec};
use crate::error::{Error, Result};
use crate::geometry::Trajectory;
use crate::network::{corridor, FlowField, RoadNetwork};
use crate::reconstruct::{deviation, prune, Reconstruction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MinCostMode {
    Gmcf,
    Mcmcf,
}

impl fmt::Display for MinCostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MinCostMode::Gmcf => "gmcf",
            MinCostMode::Mcmcf => "mcmcf",
        })
    }
}

impl FromStr for MinCostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gmcf" => Ok(MinCostMode::Gmcf),
            "mcmcf" => Ok(MinCostMode::Mcmcf),
            _ => Err(Error::invalid(format!("unknown min-cost mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinCostOutput {
    pub reconstruction: Reconstruction,
    /// Total solver flow per edge.
    pub edge_flow: Vec<f64>,
    pub deviation: f64,
    pub solver: SolverReport,
    pub path_pieces: usize,
    pub cycle_pieces: usize,
    pub merge: MergeStats,
}

fn add_stats(total: &mut MergeStats, s: &MergeStats) {
    total.merged_cycles += s.merged_cycles;
    total.dropped_cycles += s.dropped_cycles;
    total.dropped_mass += s.dropped_mass;
    total.rounding_excess += s.rounding_excess;
}

/// Solves the min-cost flow over the trajectories' corridors and turns the
/// flow into routes.
pub fn mincost_reconstruction(
    net: &RoadNetwork,
    phi: &FlowField,
    trajectories: &[Trajectory],
    eps: f64,
    mode: MinCostMode,
    opts: SolverOptions,
) -> Result<MinCostOutput> {
    let commodities: Vec<Commodity> = trajectories
        .iter()
        .filter_map(|t| match corridor(net, t, eps) {
            Some(c) if !c.sources.is_empty() && !c.sinks.is_empty() => Some(Commodity {
                trajectory: t.id().to_owned(),
                corridor: c,
            }),
            _ => {
                log::warn!("trajectory {} has no terminals at eps {eps}, skipped", t.id());
                None
            }
        })
        .collect();
    if commodities.is_empty() {
        return Err(Error::NoTerminals("no trajectory has network coverage at both ends".into()));
    }
    let mut rec = Reconstruction::new();
    let mut stats = MergeStats::default();
    let (mut paths, mut cycles) = (0, 0);
    let (edge_flow, solver) = match mode {
        MinCostMode::Gmcf => {
            let terminals = TerminalSpec::union(commodities.iter().map(|c| c.terminals()).collect::<Vec<_>>().iter());
            let (flow, report) = solve_gmcf(net, phi, &terminals, opts)?;
            let d = decompose(net, &flow, &terminals)?;
            paths += d.paths.len();
            cycles += d.cycles.len();
            let m = merge_cycles(net, &d, None);
            add_stats(&mut stats, &m.stats);
            rec = m.reconstruction;
            (flow.values, report)
        }
        MinCostMode::Mcmcf => {
            let (flows, report) = solve_mcmcf(net, phi, &commodities, opts)?;
            let mut total = vec![0.0; net.edge_count()];
            for (cf, c) in flows.iter().zip(&commodities) {
                for (t, v) in total.iter_mut().zip(&cf.flow.values) {
                    *t += v;
                }
                let d = decompose(net, &cf.flow, &c.terminals())?;
                paths += d.paths.len();
                cycles += d.cycles.len();
                let m = merge_cycles(net, &d, Some(&cf.trajectory));
                add_stats(&mut stats, &m.stats);
                for (route, coef, src) in m.reconstruction.iter() {
                    rec.push(route.clone(), coef, src.map(str::to_owned));
                }
            }
            (total, report)
        }
    };
    let rec = prune(&rec, 0.0);
    Ok(MinCostOutput {
        deviation: deviation(phi, &rec),
        reconstruction: rec,
        edge_flow,
        solver,
        path_pieces: paths,
        cycle_pieces: cycles,
        merge: stats,
    })
}
