//! Trains the similarity-aware encoder/decoder on its own, decoding the
//! target frame from a fixed observation prefix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stemo::dtwsim::{build_similarity_slice, DtwTables};
use stemo::graphcore::{build_spatial_adjacency, SpatialAdjacency};
use stemo::harness::synthetic::{changepoint, ChangepointSpec};
use stemo::harness::{split_windows, Window};
use stemo::numdiff::{AdamState, Tape, Var};
use stemo::predictor::{mae_on_tape, train_predictor_step, EncoderState, Predictor, PredictorConfig};

const HORIZON: usize = 12;
const TAU: usize = 8;

/// Encodes `window` through step `TAU` and decodes the last frame.
fn forward(p: &Predictor, tape: &mut Tape, w: &Window, adj: &SpatialAdjacency) -> stemo::Result<Var> {
    let n = w.inputs[0].len();
    let mut dtw = DtwTables::new(n, HORIZON);
    let mut enc = EncoderState::initial(tape, n, p.config.hidden);
    for t in 0..=TAU {
        dtw.extend(&w.inputs[t])?;
        let sim = build_similarity_slice(&dtw, t, 5.0)?;
        enc = p.encode_step(tape, &w.inputs[..=t], &enc, &sim, adj)?;
    }
    Ok(p.decode(tape, &enc, adj)?.xhat)
}

fn test_mae(p: &Predictor, test: &[Window], adj: &SpatialAdjacency) -> stemo::Result<f64> {
    let mut total = 0.0;
    for w in test {
        let mut tape = Tape::new();
        let out = forward(p, &mut tape, w, adj)?;
        let loss = mae_on_tape(&mut tape, out, &w.inputs[HORIZON - 1])?;
        total += tape.scalar(loss);
    }
    Ok(total / test.len() as f64)
}

fn main() -> stemo::Result<()> {
    let ds = changepoint(&ChangepointSpec::default())?;
    let sw = split_windows(&ds, HORIZON, HORIZON)?;
    let adj = build_spatial_adjacency(&ds.graph, ds.graph.default_eta())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut p = Predictor::new(PredictorConfig { horizon: HORIZON, hidden: 12 }, &mut rng);
    let mut adam = AdamState::new(&p.store, 0.005);
    println!("normalized test MAE before training {:.3}", test_mae(&p, &sw.test, &adj)?);
    for epoch in 1..=5 {
        let mut total = 0.0;
        for w in &sw.train {
            let mut tape = Tape::new();
            let out = forward(&p, &mut tape, w, &adj)?;
            total += train_predictor_step(&mut p, &mut adam, &mut tape, out, &w.inputs[HORIZON - 1])?;
        }
        println!(
            "epoch {epoch}: train {:.3} test {:.3}",
            total / sw.train.len() as f64,
            test_mae(&p, &sw.test, &adj)?
        );
    }
    Ok(())
}
