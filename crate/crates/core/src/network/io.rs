use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EdgeSpec, FlowField, RoadNetwork, Vertex};
use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    vertices: Vec<VertexRecord>,
    edges: Vec<EdgeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRecord {
    id: String,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    id: String,
    from: String,
    to: String,
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

/// Loads a network JSON file. Ids are kept verbatim.
pub fn load_network(path: impl AsRef<Path>) -> Result<RoadNetwork> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let file: NetworkFile = serde_json::from_str(&text).map_err(|e| {
        Error::parse(path, e.line(), format!("column {}: {e}", e.column()))
    })?;
    let vertices = file
        .vertices
        .into_iter()
        .map(|v| Vertex {
            id: v.id,
            pos: Point::new(v.x, v.y),
        })
        .collect();
    let edges = file
        .edges
        .into_iter()
        .map(|e| EdgeSpec::new(e.id, e.from, e.to))
        .collect();
    RoadNetwork::new(vertices, edges)
}

/// Writes the canonical form: entries sorted by id, pretty-printed, trailing LF.
pub fn write_network(path: impl AsRef<Path>, net: &RoadNetwork) -> Result<()> {
    let file = NetworkFile {
        vertices: net
            .vertices()
            .iter()
            .map(|v| VertexRecord {
                id: v.id.clone(),
                x: v.pos.x,
                y: v.pos.y,
            })
            .collect(),
        edges: net
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                id: e.id.clone(),
                from: net.vertex(e.from).id.clone(),
                to: net.vertex(e.to).id.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("network serializes");
    text.push('\n');
    write_bytes(path.as_ref(), text.as_bytes())
}

/// Loads a flow-field CSV with header `edge_id,count`.
pub fn load_flow_field(path: impl AsRef<Path>, net: &RoadNetwork) -> Result<FlowField> {
    let path = path.as_ref();
    let mut field = FlowField::zeros(net);
    let text = read_to_string(path)?;
    if text.trim().is_empty() {
        return Ok(field);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["edge_id", "count"] {
        return Err(Error::parse(path, 1, "expected header edge_id,count"));
    }
    let mut seen = vec![false; net.edge_count()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = &rec[0];
        let e = net
            .edge_index(id)
            .ok_or_else(|| Error::parse(path, line, format!("unknown edge id {id}")))?;
        let raw = &rec[1];
        let count: i64 = raw
            .parse()
            .map_err(|_| Error::parse(path, line, format!("count {raw:?} is not an integer")))?;
        if count < 0 {
            return Err(Error::parse(path, line, format!("negative count {count} for edge {id}")));
        }
        if std::mem::replace(&mut seen[e], true) {
            return Err(Error::parse(path, line, format!("duplicate edge id {id}")));
        }
        field.set(e, count as u64);
    }
    Ok(field)
}

pub fn write_flow_field(path: impl AsRef<Path>, net: &RoadNetwork, phi: &FlowField) -> Result<()> {
    let mut text = String::from("edge_id,count\n");
    for (e, edge) in net.edges().iter().enumerate() {
        text.push_str(&format!("{},{}\n", edge.id, phi.get(e)));
    }
    write_bytes(path.as_ref(), text.as_bytes())
}

/// Writes one real value per edge as CSV `edge_id,<column>`.
pub fn write_edge_values(
    path: impl AsRef<Path>,
    net: &RoadNetwork,
    column: &str,
    values: &[f64],
) -> Result<()> {
    let mut text = format!("edge_id,{column}\n");
    for (edge, v) in net.edges().iter().zip(values) {
        text.push_str(&format!("{},{:?}\n", edge.id, v));
    }
    write_bytes(path.as_ref(), text.as_bytes())
}
