//! Incremental DTW tables and the similarity stack the predictor consumes.

use stemo::dtwsim::{build_similarity_slice, dtw_full, DtwTables};
use stemo::harness::synthetic::{changepoint, ChangepointSpec};
use stemo::predictor::Scaler;

fn main() -> stemo::Result<()> {
    let ds = changepoint(&ChangepointSpec {
        blocks: 1,
        ..ChangepointSpec::default()
    })?;
    let n = ds.n();
    let scaler = Scaler::fit(&ds.values)?;
    let rows: Vec<Vec<f64>> = ds.values.iter().map(|r| scaler.transform(r)).collect();
    let mut tables = DtwTables::new(n, rows.len());
    for row in &rows {
        tables.extend(row)?;
    }
    let t = ds.len() - 1;
    let series = |i: usize| -> Vec<f64> { rows.iter().map(|r| r[i]).collect() };
    println!("DTW(node0, node1) incremental {:.4} full {:.4}", tables.distance(0, 1, t, t), dtw_full(&series(0), &series(1))?);

    let sim = build_similarity_slice(&tables, t, 0.5)?;
    let current = sim.slice(t)?;
    println!("similarity of full prefixes at t={t}:");
    for j in 0..n {
        let row: Vec<String> = current.row(j).iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
