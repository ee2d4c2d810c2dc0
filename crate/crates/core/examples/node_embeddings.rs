//! Biased random walks over the similarity graph and skip-gram embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stemo::dtwsim::{build_similarity_slice, DtwTables};
use stemo::harness::synthetic::{changepoint, ChangepointSpec};
use stemo::nodeembed::{sample_walks, train_embeddings, EmbeddingTable, WalkConfig};

fn main() -> stemo::Result<()> {
    let ds = changepoint(&ChangepointSpec {
        blocks: 1,
        ..ChangepointSpec::default()
    })?;
    let n = ds.n();
    let cfg = WalkConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut table = EmbeddingTable::new(n, cfg.dim, &mut rng);
    let mut tables = DtwTables::new(n, ds.len());
    // nodes 0 and 1 halt halfway; walks are biased towards them afterwards
    let mut halted = vec![false; n];
    for (t, row) in ds.values.iter().enumerate() {
        tables.extend(row)?;
        if t == ds.len() / 2 {
            halted[0] = true;
            halted[1] = true;
        }
        let sim = build_similarity_slice(&tables, t, 5.0)?;
        let walks = sample_walks(&sim, &halted, &cfg, t as u64);
        table = train_embeddings(&walks, &table, &cfg, t, &mut rng);
    }
    println!("embeddings after {} steps (max norm {:.3}):", ds.len(), table.max_norm());
    for i in 0..n {
        let v: Vec<String> = table.vector(i).iter().map(|x| format!("{x:+.3}")).collect();
        println!("  node {i}: [{}]", v.join(", "));
    }
    println!("score(0,1) {:.3}  score(0,5) {:.3}", table.score(0, 1), table.score(0, 5));
    Ok(())
}
