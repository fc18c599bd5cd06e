use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::{Point, Trajectory};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct Row {
    traj_id: String,
    seq: i64,
    x: f64,
    y: f64,
    t: Option<f64>,
}

/// Reads a trajectory CSV (`traj_id,seq,x,y,t`, `t` may be empty).
///
/// Rows must be sorted by `(traj_id, seq)`; trajectories are returned in id
/// order.
pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let expected = ["traj_id", "seq", "x", "y", "t"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(path, 1, format!("expected header {}", expected.join(","))));
    }
    let mut grouped: BTreeMap<String, Vec<(i64, Point, Option<f64>)>> = BTreeMap::new();
    let mut last_key: Option<(String, i64)> = None;
    for rec in rdr.deserialize::<Row>() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let key = (row.traj_id.clone(), row.seq);
        if let Some(prev) = &last_key {
            if *prev >= key {
                return Err(Error::invalid(format!(
                    "{}: rows not sorted by (traj_id, seq) at trajectory {} seq {}",
                    path.display(),
                    row.traj_id,
                    row.seq
                )));
            }
        }
        last_key = Some(key);
        grouped
            .entry(row.traj_id)
            .or_default()
            .push((row.seq, Point::new(row.x, row.y), row.t));
    }
    grouped
        .into_iter()
        .map(|(id, rows)| Trajectory::with_times(id, rows.into_iter().map(|(_, p, t)| (p, t))))
        .collect()
}

pub fn write_trajectories(path: impl AsRef<Path>, trajs: &[Trajectory]) -> Result<()> {
    let path = path.as_ref();
    let mut sorted: Vec<&Trajectory> = trajs.iter().collect();
    sorted.sort_by(|a, b| a.id().cmp(b.id()));
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    wtr.write_record(["traj_id", "seq", "x", "y", "t"]).map_err(csv_err)?;
    for t in sorted {
        for (i, (p, time)) in t.points().iter().zip(t.times()).enumerate() {
            let time = time.map(|v| v.to_string()).unwrap_or_default();
            wtr.write_record([t.id(), &i.to_string(), &p.x.to_string(), &p.y.to_string(), &time])
                .map_err(csv_err)?;
        }
    }
    let bytes = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}
