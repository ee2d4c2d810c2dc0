//! Gaussian-kernel adjacency from sensor coordinates.

use stemo::graphcore::{build_spatial_adjacency, Graph};

fn main() -> stemo::Result<()> {
    let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    let g = Graph::from_coords(ids, vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (5.0, 5.0)])?;
    let eta = g.default_eta();
    let adj = build_spatial_adjacency(&g, eta)?;
    println!("eta = {eta:.3}");
    println!("raw kernel / normalized with self loops:");
    for i in 0..g.n() {
        let raw: Vec<String> = adj.a_s.row(i).iter().map(|v| format!("{v:.3}")).collect();
        let norm: Vec<String> = adj.a_s_norm.row(i).iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}   |   {}", raw.join(" "), norm.join(" "));
    }
    Ok(())
}
