//! Writes a synthetic periodic dataset to CSV, reads it back, and scores the
//! historical-average baseline on the held-out windows.

use stemo::evalmetrics::{mae, HistoricalAverage};
use stemo::harness::synthetic::{periodic, PeriodicSpec};
use stemo::harness::{ingest_csv, split_windows};

fn main() -> stemo::Result<()> {
    let dir = std::env::temp_dir().join("stemo-csv-example");
    std::fs::create_dir_all(&dir).map_err(|e| stemo::StemoError::Io { path: dir.clone(), source: e })?;
    let (series, graph) = (dir.join("series.csv"), dir.join("graph.csv"));
    let original = periodic(&PeriodicSpec {
        sigma: 0.5,
        ..PeriodicSpec::default()
    })?;
    original.write_series_csv(&series)?;
    original.write_graph_csv(&graph)?;
    let ds = ingest_csv(&series, &graph)?;
    println!("read {} steps x {} nodes every {}s from {}", ds.len(), ds.n(), ds.interval_secs, dir.display());

    let sw = split_windows(&ds, 12, 12)?;
    let train = &ds.values[sw.splits.train.clone()];
    let by_node: Vec<Vec<f64>> = (0..ds.n()).map(|i| train.iter().map(|r| r[i]).collect()).collect();
    let ha = HistoricalAverage::fit(&by_node, sw.splits.train.start, ds.period())?;
    let mut total = 0.0;
    for w in &sw.test {
        total += mae(&ha.predict(w.end() - 1), &w.raw[w.len() - 1])?;
    }
    println!("historical average MAE on {} test windows: {:.3}", sw.test.len(), total / sw.test.len() as f64);
    Ok(())
}
