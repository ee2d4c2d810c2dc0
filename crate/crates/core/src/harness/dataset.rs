//! CSV ingestion and the in-memory dataset.
//!
//! Series file: `timestamp,node,value`; timestamps are RFC 3339, `%Y-%m-%d %H:%M:%S`
//! or integer seconds. Graph file: either `from,to,dist` or `node,x,y`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Result, StemoError};
use crate::graphcore::Graph;
use crate::numdiff::Tensor;

/// Aligned scalar series per node on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalDataset {
    pub graph: Graph,
    /// Seconds since the Unix epoch, one per row.
    pub timestamps: Vec<i64>,
    /// `values[t][i]`.
    pub values: Vec<Vec<f64>>,
    pub interval_secs: i64,
    /// Entries filled from a neighbouring observation.
    pub filled: usize,
}

impl SpatioTemporalDataset {
    pub fn new(graph: Graph, timestamps: Vec<i64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = graph.n();
        if timestamps.len() != values.len() {
            return Err(StemoError::Data(format!(
                "{} timestamps for {} rows",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some((t, r)) = values.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(StemoError::Data(format!("row {t} has {} values for {n} nodes", r.len())));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StemoError::Data("non-finite value in series".into()));
        }
        let interval_secs = check_uniform(&timestamps)?;
        Ok(Self {
            graph,
            timestamps,
            values,
            interval_secs,
            filled: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Rows per day, the HA period.
    pub fn period(&self) -> usize {
        ((86_400 / self.interval_secs.max(1)) as usize).max(1)
    }

    /// Writes the series in long form `timestamp,node,value`.
    pub fn write_series_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["timestamp", "node", "value"])?;
        for (ts, row) in self.timestamps.iter().zip(&self.values) {
            for (id, v) in self.graph.node_ids.iter().zip(row) {
                w.write_record([ts.to_string(), id.clone(), format!("{v}")])?;
            }
        }
        w.flush().map_err(|e| StemoError::io(path, e))
    }

    /// Writes coordinates when known, pairwise distances otherwise.
    pub fn write_graph_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let g = &self.graph;
        match &g.coords {
            Some(coords) => {
                w.write_record(["node", "x", "y"])?;
                for (id, (x, y)) in g.node_ids.iter().zip(coords) {
                    w.write_record([id.clone(), format!("{x}"), format!("{y}")])?;
                }
            }
            None => {
                w.write_record(["from", "to", "dist"])?;
                for (i, a) in g.node_ids.iter().enumerate() {
                    for (j, b) in g.node_ids.iter().enumerate() {
                        if i != j {
                            w.write_record([a.clone(), b.clone(), format!("{}", g.dist.at(i, j))])?;
                        }
                    }
                }
            }
        }
        w.flush().map_err(|e| StemoError::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> StemoError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => StemoError::io(path, io),
        other => StemoError::Data(format!("{}: {other:?}", path.display())),
    }
}

fn check_uniform(ts: &[i64]) -> Result<i64> {
    if ts.len() < 2 {
        return Ok(1);
    }
    let step = ts[1] - ts[0];
    if step <= 0 {
        return Err(StemoError::Data("timestamps must increase".into()));
    }
    for (k, w) in ts.windows(2).enumerate() {
        if w[1] - w[0] != step {
            return Err(StemoError::Data(format!(
                "non-uniform sampling at row {}: step {} vs {step}",
                k + 1,
                w[1] - w[0]
            )));
        }
    }
    Ok(step)
}

pub fn parse_timestamp(s: &str) -> Result<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(StemoError::Data(format!("unparseable timestamp {s:?}")))
}

fn read_graph(path: &Path) -> Result<Graph> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_lowercase()).collect();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let num = |s: &str, what: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| StemoError::Data(format!("{}: bad {what} {s:?}", path.display())))
    };
    match headers.as_slice() {
        [a, b, c] if a == "node" && b == "x" && c == "y" => {
            let mut ids = Vec::new();
            let mut coords = Vec::new();
            for r in &records {
                ids.push(r[0].trim().to_string());
                coords.push((num(&r[1], "x")?, num(&r[2], "y")?));
            }
            Graph::from_coords(ids, coords)
        }
        [a, b, c] if a == "from" && b == "to" && c == "dist" => {
            let mut index: BTreeMap<String, usize> = BTreeMap::new();
            for r in &records {
                for k in [0, 1] {
                    let len = index.len();
                    index.entry(r[k].trim().to_string()).or_insert(len);
                }
            }
            let n = index.len();
            let mut ids = vec![String::new(); n];
            for (id, &i) in &index {
                ids[i] = id.clone();
            }
            let mut dist = Tensor::zeros(&[n, n]);
            let mut seen = vec![false; n * n];
            for r in &records {
                let (i, j) = (index[r[0].trim()], index[r[1].trim()]);
                let d = num(&r[2], "distance")?;
                dist.set(i, j, d);
                dist.set(j, i, d);
                seen[i * n + j] = true;
                seen[j * n + i] = true;
            }
            if let Some(k) = (0..n * n).find(|&k| k / n != k % n && !seen[k]) {
                return Err(StemoError::Data(format!(
                    "no distance between {} and {}",
                    ids[k / n],
                    ids[k % n]
                )));
            }
            Graph::from_distances(ids, dist)
        }
        _ => Err(StemoError::Data(format!(
            "{}: expected header node,x,y or from,to,dist, got {}",
            path.display(),
            headers.join(",")
        ))),
    }
}

/// Reads a long-form series CSV and a graph CSV. Missing `(timestamp, node)`
/// entries are forward-filled, leading gaps back-filled; a node with no
/// observation at all is an error.
pub fn ingest_csv(series: &Path, graph: &Path) -> Result<SpatioTemporalDataset> {
    let g = read_graph(graph)?;
    let index: HashMap<&str, usize> = g.node_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let n = g.n();
    let mut rdr = csv::Reader::from_path(series).map_err(|e| csv_io(series, e))?;
    let mut by_time: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(StemoError::Data(format!("series row {} has {} fields", k + 1, rec.len())));
        }
        let ts = parse_timestamp(&rec[0])?;
        let node = rec[1].trim();
        let i = *index
            .get(node)
            .ok_or_else(|| StemoError::Data(format!("series references unknown node {node:?}")))?;
        let v: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| StemoError::Data(format!("series row {}: bad value {:?}", k + 1, &rec[2])))?;
        if !v.is_finite() {
            return Err(StemoError::Data(format!("series row {}: non-finite value", k + 1)));
        }
        by_time.entry(ts).or_insert_with(|| vec![None; n])[i] = Some(v);
    }
    if by_time.is_empty() {
        return Err(StemoError::Data(format!("{}: no observations", series.display())));
    }
    let timestamps: Vec<i64> = by_time.keys().copied().collect();
    let mut raw: Vec<Vec<Option<f64>>> = by_time.into_values().collect();
    let filled = fill_gaps(&mut raw, &g.node_ids)?;
    let values = raw
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect();
    let mut ds = SpatioTemporalDataset::new(g, timestamps, values)?;
    ds.filled = filled;
    Ok(ds)
}

/// Forward fill, then back fill; returns the number of filled entries.
pub fn fill_gaps(rows: &mut [Vec<Option<f64>>], ids: &[String]) -> Result<usize> {
    let n = ids.len();
    let mut filled = 0;
    for i in 0..n {
        let Some(first) = rows.iter().position(|r| r[i].is_some()) else {
            return Err(StemoError::Data(format!("node {} has no observations", ids[i])));
        };
        let mut last = rows[first][i];
        for r in rows.iter_mut() {
            match r[i] {
                Some(v) => last = Some(v),
                None => {
                    r[i] = last;
                    filled += 1;
                }
            }
        }
    }
    Ok(filled)
}
