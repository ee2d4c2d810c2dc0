//! Finite-difference checks for every differentiable block, one seeded instance at a time.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stemo::dtwsim::{build_similarity_slice, DtwTables};
use stemo::graphcore::{build_spatial_adjacency, Graph, SpatialAdjacency};
use stemo::morl::QNetwork;
use stemo::numdiff::{GruCell, Linear, ParamStore, Tape, Tensor};
use stemo::predictor::{
    commit_on_tape, mae_on_tape, mgcn_forward, EncoderState, MgcnLayer, Predictor, PredictorConfig,
};
use stemo::Result;

use super::{check_params, project, projection_weights, rel_err, FD_STEP, REL_FLOOR};

fn rand_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_graph<R: Rng>(n: usize, rng: &mut R) -> SpatialAdjacency {
    let coords = (0..n).map(|_| (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0))).collect();
    let g = Graph::from_coords((0..n).map(|i| format!("v{i}")).collect(), coords).unwrap();
    build_spatial_adjacency(&g, g.default_eta()).unwrap()
}

pub fn linear(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, din, dout) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..5));
    let mut store = ParamStore::new();
    let layer = Linear::new(&mut store, "lin", din, dout, &mut rng);
    let x = rand_matrix(rows, din, &mut rng);
    let w = projection_weights(rows * dout, &mut rng);
    let params = check_params(&mut store, |tape, s| {
        let xv = tape.input(&x);
        let y = layer.forward(tape, s, xv)?;
        let y = tape.tanh(y);
        project(tape, y, &w)
    })?;
    // gradient with respect to the input as well
    let mut tape = Tape::new();
    let xv = tape.watch(&x);
    let y = layer.forward(&mut tape, &store, xv)?;
    let y = tape.tanh(y);
    let l = project(&mut tape, y, &w)?;
    let mut scratch = store.clone();
    tape.backward(l, &mut scratch)?;
    let gx = tape.grad(xv).expect("watched input has a gradient").to_vec();
    let eval = |x: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let xv = tape.input(x);
        let y = layer.forward(&mut tape, &store, xv)?;
        let y = tape.tanh(y);
        let l = project(&mut tape, y, &w)?;
        Ok(tape.scalar(l))
    };
    let mut worst = params;
    for k in 0..x.len() {
        let mut up = x.clone();
        up.values_mut()[k] += FD_STEP;
        let mut down = x.clone();
        down.values_mut()[k] -= FD_STEP;
        let numeric = (eval(&up)? - eval(&down)?) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(gx[k], numeric, REL_FLOOR));
    }
    Ok(worst)
}

pub fn gru(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, din, h) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..6));
    let mut store = ParamStore::new();
    let cell = GruCell::new(&mut store, "gru", din, h, &mut rng);
    let x = rand_matrix(rows, din, &mut rng);
    let h0 = rand_matrix(rows, h, &mut rng);
    let w = projection_weights(rows * h, &mut rng);
    check_params(&mut store, |tape, s| {
        let xv = tape.input(&x);
        let hv = tape.input(&h0);
        // two steps so the recurrent weights see their own output
        let h1 = cell.forward(tape, s, xv, hv)?;
        let h2 = cell.forward(tape, s, xv, h1)?;
        project(tape, h2, &w)
    })
}

pub fn mgcn(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..5);
    let horizon = rng.random_range(2..6);
    let hidden = rng.random_range(1..5);
    let t = rng.random_range(0..horizon);
    let adj = random_graph(n, &mut rng);
    let history: Vec<Vec<f64>> = (0..=t).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mut dtw = DtwTables::new(n, horizon);
    for row in &history {
        dtw.extend(row)?;
    }
    let sim = build_similarity_slice(&dtw, t, 0.5)?;
    let mut store = ParamStore::new();
    let layer = MgcnLayer::new(&mut store, horizon, hidden, &mut rng);
    let w = projection_weights(n * hidden, &mut rng);
    check_params(&mut store, |tape, s| {
        let out = mgcn_forward(tape, s, &layer, &history, &sim, &adj)?;
        project(tape, out, &w)
    })
}

pub fn q_mlp(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, state_dim, hidden) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(2..7));
    let mut q = QNetwork::new(state_dim, hidden, &mut rng);
    let x = rand_matrix(rows, state_dim + 2, &mut rng);
    let w = projection_weights(rows * 4, &mut rng);
    let net = q.clone();
    check_params(&mut q.store, |tape, s| {
        let xv = tape.input(&x);
        let out = net.forward_with(tape, s, xv)?;
        project(tape, out, &w)
    })
}

/// Whole predictor: encoder over the prefix, decoder at each node's halt
/// time, masked commit and MAE against a random target.
pub fn end_to_end(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..5);
    let horizon = rng.random_range(2..6);
    let hidden = rng.random_range(2..5);
    let adj = random_graph(n, &mut rng);
    let window: Vec<Vec<f64>> = (0..horizon).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let halts: Vec<usize> = (0..n).map(|_| rng.random_range(0..horizon)).collect();
    let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut predictor = Predictor::new(PredictorConfig { horizon, hidden }, &mut rng);
    let mut dtw = DtwTables::new(n, horizon);
    let mut sims = Vec::new();
    for t in 0..horizon {
        dtw.extend(&window[t])?;
        sims.push(build_similarity_slice(&dtw, t, 0.5)?);
    }
    let template = predictor.clone();
    check_params(&mut predictor.store, |tape, s| {
        let mut p = template.clone();
        p.store = s.clone();
        let mut enc = EncoderState::initial(tape, n, hidden);
        let mut candidates = Vec::new();
        for t in 0..horizon {
            enc = p.encode_step(tape, &window[..=t], &enc, &sims[t], &adj)?;
            if halts.contains(&t) {
                candidates.push(p.decode(tape, &enc, &adj)?);
            }
        }
        let committed = commit_on_tape(tape, &candidates, &halts)?;
        mae_on_tape(tape, committed, &truth)
    })
}
