use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Reconstruction, Route};
use crate::error::{Error, Result};
use crate::network::io::{read_to_string, write_bytes};
use crate::network::RoadNetwork;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReconstructionFile {
    routes: Vec<RouteRecord>,
    deviation: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteRecord {
    id: String,
    edges: Vec<String>,
    coefficient: f64,
    source_trajectory: Option<String>,
}

/// Writes routes in basis order with ids `r0, r1, ...`.
pub fn write_reconstruction(
    path: impl AsRef<Path>,
    net: &RoadNetwork,
    rec: &Reconstruction,
    deviation: f64,
) -> Result<()> {
    let file = ReconstructionFile {
        routes: rec
            .iter()
            .enumerate()
            .map(|(i, (route, c, src))| RouteRecord {
                id: format!("r{i}"),
                edges: route.edges().iter().map(|&e| net.edge(e).id.clone()).collect(),
                coefficient: c,
                source_trajectory: src.map(str::to_owned),
            })
            .collect(),
        deviation,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("serializable");
    text.push('\n');
    write_bytes(path.as_ref(), text.as_bytes())
}

/// Loads a reconstruction file; returns the routes and the recorded
/// deviation.
pub fn load_reconstruction(path: impl AsRef<Path>, net: &RoadNetwork) -> Result<(Reconstruction, f64)> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let file: ReconstructionFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), format!("column {}: {e}", e.column())))?;
    let mut rec = Reconstruction::new();
    let mut ids = HashSet::new();
    for r in file.routes {
        let bad = |msg: String| Error::invalid(format!("{}: route {}: {msg}", path.display(), r.id));
        if !ids.insert(r.id.clone()) {
            return Err(bad("duplicate route id".into()));
        }
        if !(r.coefficient >= 0.0 && r.coefficient.is_finite()) {
            return Err(bad(format!("coefficient {} is not a nonnegative number", r.coefficient)));
        }
        let edges = r
            .edges
            .iter()
            .map(|id| net.edge_index(id).ok_or_else(|| bad(format!("unknown edge {id:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let route = Route::new(net, edges).map_err(|e| bad(e.to_string()))?;
        rec.push(route, r.coefficient, r.source_trajectory);
    }
    Ok((rec, file.deviation))
}
